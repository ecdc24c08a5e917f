#include "imagery/agents.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <regex>
#include <thread>

#include "httplib.h"
#include "imagery/error.hpp"
#include "imagery/random.hpp"
#include "json.hpp"

namespace imagery {

using ordered_json = nlohmann::ordered_json;

namespace {

std::optional<Memory> last_memory(const TurnContext& ctx) {
    if (ctx.previous_outputs.empty()) return std::nullopt;
    try {
        return parse_turn_output(ctx.previous_outputs.back()).memory;
    } catch (const Error&) {
        return std::nullopt;
    }
}

std::optional<ObjectLabel> decided(const Memory& m) {
    std::optional<ObjectLabel> pick;
    for (ObjectLabel l : kOptionLabels) {
        if (m.partial_conclusion[option_index(l)] != Conclusion::probably_the_odd_one) continue;
        if (pick) return std::nullopt;
        pick = l;
    }
    return pick;
}

Memory verdict(ObjectLabel odd, std::string rationale) {
    Memory m;
    m.rationale = std::move(rationale);
    for (ObjectLabel l : kOptionLabels)
        m.partial_conclusion[option_index(l)] =
            l == odd ? Conclusion::probably_the_odd_one : Conclusion::probably_not_the_answer;
    return m;
}

// A zero-rotation request keeps the turn schema-valid while waiting out the
// minimum iteration count.
TurnOutput hold(const TurnContext& ctx, Memory memory) {
    TurnOutput t;
    t.memory = std::move(memory);
    t.iteration_number = ctx.iteration_number;
    t.commands.push_back({ObjectLabel::A, {{Direction::left, 0}}});
    return t;
}

// Carries a decision forward and answers once allowed to.
TurnOutput settle(const TurnContext& ctx, Memory memory, ObjectLabel odd) {
    TurnOutput t;
    if (ctx.iteration_number >= ctx.min_iterations) {
        t.memory = std::move(memory);
        t.iteration_number = ctx.iteration_number;
        t.final_answer = odd;
        return t;
    }
    return hold(ctx, std::move(memory));
}

const LabeledGrid* grid_for(const TurnContext& ctx, ObjectLabel l) {
    for (const auto& g : ctx.last_grids)
        if (g.target == l) return &g;
    return nullptr;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------- oracle

VoxelOracleAgent::VoxelOracleAgent(std::vector<Problem> problems) {
    for (auto& p : problems) problems_.emplace(p.id, std::move(p));
}

std::string VoxelOracleAgent::respond(const TurnContext& ctx) {
    const auto it = problems_.find(ctx.problem_id);
    if (it == problems_.end()) return serialize_turn_output(hold(ctx, {"problem not in my dataset", {}}));
    std::optional<ObjectLabel> odd;
    for (ObjectLabel l : kOptionLabels)
        if (!rotation_equivalent(it->second.original, it->second.object(l))) odd = l;
    if (!odd) return serialize_turn_output(hold(ctx, {"no option differs from the original", {}}));
    return serialize_turn_output(
        settle(ctx, verdict(*odd, std::string("voxel comparison: ") + to_string(*odd) + " is not a rotation"), *odd));
}

// ---------------------------------------------------------------- reset match

namespace {

// Hamiltonian path through the 24 grid orientations using camera quarter
// turns, found by depth-first search.
const std::vector<RotationCommand>& quarter_turn_path() {
    static const std::vector<RotationCommand> path = [] {
        const std::vector<RotationCommand> moves{{Direction::right, 90}, {Direction::down, 90}, {Direction::ccw, 90}};
        std::vector<GridRotation> gens;
        for (const auto& m : moves) {
            const Mat3 r = command_matrix(m);
            GridRotation g;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) g.m[i][j] = static_cast<int>(std::lround(r.m[i][j]));
            gens.push_back(g);
        }
        std::vector<GridRotation> visited{GridRotation::identity()};
        std::vector<RotationCommand> out;
        std::function<bool()> dfs = [&]() -> bool {
            if (visited.size() == 24) return true;
            for (std::size_t k = 0; k < gens.size(); ++k) {
                const GridRotation next = gens[k] * visited.back();
                if (std::find(visited.begin(), visited.end(), next) != visited.end()) continue;
                visited.push_back(next);
                out.push_back(moves[k]);
                if (dfs()) return true;
                visited.pop_back();
                out.pop_back();
            }
            return false;
        };
        if (!dfs()) throw Error("no quarter-turn path through the rotation group");
        return out;
    }();
    return path;
}

std::vector<RasterImage> frames_of(const LabeledGrid& g, const std::vector<std::size_t>& idx) {
    const auto cells = split_grid(g.image);
    std::vector<RasterImage> out;
    for (std::size_t i : idx) {
        if (i >= cells.size()) return {};
        out.push_back(cells[i]);
    }
    return out;
}

// Largest distance from a frame of one set to its nearest frame in the other.
double set_distance(const std::vector<RasterImage>& a, const std::vector<RasterImage>& b, double early) {
    double worst = 0;
    for (const auto* pair : {&a, &b}) {
        const auto& from = *pair;
        const auto& to = pair == &a ? b : a;
        for (const auto& f : from) {
            double best = 1.0;
            for (const auto& g : to) {
                best = std::min(best, image_diff(f, g));
                if (best <= early) break;
            }
            worst = std::max(worst, best);
        }
    }
    return worst;
}

}  // namespace

std::vector<RotationCommand> ResetMatchAgent::walk() const {
    const RotationCommand away{Direction::left, config_.view_yaw_deg}, tilt{Direction::down, config_.view_pitch_deg};
    const RotationCommand untilt{Direction::up, config_.view_pitch_deg}, back{Direction::right, config_.view_yaw_deg};
    std::vector<RotationCommand> w{RotationCommand::reset(), away, tilt};
    for (const auto& move : quarter_turn_path()) {
        w.push_back(untilt);
        w.push_back(back);
        w.push_back(move);
        w.push_back(away);
        w.push_back(tilt);
    }
    return w;
}

std::vector<std::size_t> ResetMatchAgent::frame_indices() const {
    std::vector<std::size_t> idx{2};
    for (std::size_t k = 1; k < 24; ++k) idx.push_back(2 + 5 * k);
    return idx;
}

std::string ResetMatchAgent::respond(const TurnContext& ctx) {
    if (!ctx.reset_enabled) {
        Memory m;
        m.rationale = "reset is unavailable here, so canonical views cannot be compared";
        return serialize_turn_output(hold(ctx, m));
    }
    if (const auto mem = last_memory(ctx))
        if (const auto odd = decided(*mem)) return serialize_turn_output(settle(ctx, *mem, *odd));

    const auto idx = frame_indices();
    std::map<ObjectLabel, std::vector<RasterImage>> frames;
    for (ObjectLabel l : kAllLabels)
        if (const LabeledGrid* g = grid_for(ctx, l)) {
            auto f = frames_of(*g, idx);
            if (!f.empty()) frames[l] = std::move(f);
        }

    const bool have_options = frames.contains(ObjectLabel::A) && frames.contains(ObjectLabel::B) &&
                              frames.contains(ObjectLabel::C);
    if (!have_options || (ctx.allow_original_target && !frames.contains(ObjectLabel::original))) {
        TurnOutput t;
        t.memory.rationale = "resetting every object and photographing it in all 24 orientations";
        t.iteration_number = ctx.iteration_number;
        if (ctx.allow_original_target) t.commands.push_back({ObjectLabel::original, walk()});
        for (ObjectLabel l : kOptionLabels) t.commands.push_back({l, walk()});
        return serialize_turn_output(t);
    }

    const double eps = config_.match_threshold;
    ObjectLabel odd = ObjectLabel::A;
    std::string why;
    if (ctx.allow_original_target) {
        double worst = -1;
        for (ObjectLabel l : kOptionLabels) {
            const double d = set_distance(frames[ObjectLabel::original], frames[l], eps);
            why += std::string(to_string(l)) + "~original " + fmt(d) + "; ";
            if (d > worst) worst = d, odd = l;
        }
    } else {
        const std::array<std::pair<ObjectLabel, ObjectLabel>, 3> pairs{
            {{ObjectLabel::B, ObjectLabel::C}, {ObjectLabel::A, ObjectLabel::C}, {ObjectLabel::A, ObjectLabel::B}}};
        double best = 2;
        for (std::size_t i = 0; i < 3; ++i) {
            const double d = set_distance(frames[pairs[i].first], frames[pairs[i].second], eps);
            why += std::string(to_string(pairs[i].first)) + "~" + to_string(pairs[i].second) + " " + fmt(d) + "; ";
            if (d < best) best = d, odd = kOptionLabels[i];
        }
    }
    return serialize_turn_output(settle(ctx, verdict(odd, "canonical view sets: " + why + "odd one " + to_string(odd)), odd));
}

// ---------------------------------------------------------------- orbit search

OrbitSearchAgent::OrbitSearchAgent(OrbitSearchConfig config) : config_(config) {
    const double turns = 360.0 / config_.step_deg;
    if (!(config_.step_deg > 0) || std::abs(turns - std::round(turns)) > 1e-9)
        throw ConfigError("orbit step must divide 360");
}

std::vector<RotationCommand> OrbitSearchAgent::sweep() const {
    const int n = static_cast<int>(std::round(360.0 / config_.step_deg));
    std::vector<RotationCommand> s{{Direction::up, config_.tilt_deg}};
    auto circle = [&] {
        for (int j = 0; j < n; ++j) {
            s.push_back({Direction::down, config_.tilt_deg});
            s.push_back({Direction::up, config_.tilt_deg});
            s.push_back({Direction::right, config_.step_deg});
        }
    };
    circle();
    s.push_back({Direction::down, 180});
    circle();
    return s;
}

std::vector<std::size_t> OrbitSearchAgent::frame_indices() const {
    const auto n = static_cast<std::size_t>(std::round(360.0 / config_.step_deg));
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < n; ++j) idx.push_back(1 + 3 * j);
    for (std::size_t j = 0; j < n; ++j) idx.push_back(2 + 3 * n + 3 * j);
    return idx;
}

std::string OrbitSearchAgent::respond(const TurnContext& ctx) {
    if (const auto mem = last_memory(ctx))
        if (const auto odd = decided(*mem)) return serialize_turn_output(settle(ctx, *mem, *odd));

    const auto idx = frame_indices();
    std::map<ObjectLabel, std::vector<RasterImage>> frames;
    for (ObjectLabel l : kOptionLabels)
        if (const LabeledGrid* g = grid_for(ctx, l)) {
            auto f = frames_of(*g, idx);
            if (!f.empty()) frames[l] = std::move(f);
        }
    if (frames.size() < 3) {
        TurnOutput t;
        t.memory.rationale = "sweeping each option through full turns, upright and flipped";
        t.iteration_number = ctx.iteration_number;
        for (ObjectLabel l : kOptionLabels) t.commands.push_back({l, sweep()});
        return serialize_turn_output(t);
    }

    std::array<double, 3> best{1, 1, 1};
    for (ObjectLabel l : kOptionLabels)
        for (const auto& f : frames[l]) best[option_index(l)] = std::min(best[option_index(l)], image_diff(f, ctx.original_snapshot));
    const auto worst = std::max_element(best.begin(), best.end());
    const ObjectLabel odd = kOptionLabels[static_cast<std::size_t>(worst - best.begin())];
    Memory m = verdict(odd, "");
    std::string why = "best frame diff";
    for (ObjectLabel l : kOptionLabels) {
        why += std::string(" ") + to_string(l) + "=" + fmt(best[option_index(l)]);
        if (l != odd && best[option_index(l)] > config_.threshold)
            m.partial_conclusion[option_index(l)] = Conclusion::unknown;
    }
    m.rationale = why + "; odd one " + to_string(odd);
    return serialize_turn_output(settle(ctx, m, odd));
}

// ---------------------------------------------------------------- replay / factory

std::string ReplayAgent::respond(const TurnContext& ctx) {
    if (replies_.empty()) return "";
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(std::max(ctx.iteration_number, 1) - 1), replies_.size() - 1);
    return replies_[i];
}

std::string RandomGuessAgent::respond(const TurnContext& ctx) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : ctx.problem_id) h = (h ^ c) * 1099511628211ull;
    Rng rng(Rng::derive(seed_, h));
    const ObjectLabel pick = kOptionLabels[rng.below(3)];
    return serialize_turn_output(settle(ctx, verdict(pick, "guess"), pick));
}

std::unique_ptr<Agent> make_scripted_agent(std::string_view name, const ProblemSet& set, std::uint64_t seed) {
    if (name == "voxel_oracle") return std::make_unique<VoxelOracleAgent>(set.problems);
    if (name == "reset_match") return std::make_unique<ResetMatchAgent>();
    if (name == "orbit_search") return std::make_unique<OrbitSearchAgent>();
    if (name == "random_guess") return std::make_unique<RandomGuessAgent>(seed);
    throw ConfigError("unknown agent '" + std::string(name) + "'");
}

// ---------------------------------------------------------------- remote

RemoteChatConfig RemoteChatConfig::from_json(std::string_view json) {
    RemoteChatConfig c;
    ordered_json j;
    try {
        j = ordered_json::parse(json);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("remote config: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("remote config must be an object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "endpoint") c.endpoint = v.get<std::string>();
            else if (key == "model") c.model = v.get<std::string>();
            else if (key == "token_env") c.token_env = v.get<std::string>();
            else if (key == "timeout_ms") c.timeout = std::chrono::milliseconds(v.get<long long>());
            else if (key == "max_attempts") c.max_attempts = v.get<int>();
            else if (key == "backoff_ms") c.backoff = std::chrono::milliseconds(v.get<long long>());
            else if (key == "temperature") c.temperature = v.get<double>();
            else if (key == "max_tokens") c.max_tokens = v.get<int>();
            else if (key == "log_file") c.log_file = v.get<std::string>();
            else if (key == "token" || key == "api_key")
                throw ConfigError("tokens are read from the environment only; set token_env instead");
            else throw ConfigError("unknown remote config key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("remote config: ") + e.what());
    }
    if (c.max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
    return c;
}

RemoteAgent::RemoteAgent(RemoteChatConfig config) : config_(std::move(config)) {
    static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
    std::smatch m;
    if (!std::regex_match(config_.endpoint, m, url)) throw ConfigError("endpoint must be an http(s) URL");
    scheme_host_ = m[1].str();
    path_ = m[2].matched ? m[2].str() : "/";
    if (config_.max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
}

std::string RemoteAgent::request_body(const std::vector<ChatMessage>& messages) const {
    ordered_json body;
    body["model"] = config_.model;
    body["temperature"] = config_.temperature;
    body["max_tokens"] = config_.max_tokens;
    body["messages"] = ordered_json::array();
    for (const auto& msg : messages) {
        const bool has_image = std::any_of(msg.parts.begin(), msg.parts.end(),
                                           [](const ContentPart& p) { return p.kind == ContentPart::Kind::image; });
        ordered_json m{{"role", msg.role}};
        if (!has_image) {
            std::string text;
            for (const auto& p : msg.parts) text += (text.empty() ? "" : "\n\n") + p.text;
            m["content"] = text;
        } else {
            m["content"] = ordered_json::array();
            for (const auto& p : msg.parts) {
                if (p.kind == ContentPart::Kind::text)
                    m["content"].push_back({{"type", "text"}, {"text", p.text}});
                else
                    m["content"].push_back(
                        {{"type", "image_url"},
                         {"image_url", {{"url", "data:image/png;base64," + base64_encode(p.png)}}}});
            }
        }
        body["messages"].push_back(std::move(m));
    }
    return body.dump();
}

void RemoteAgent::log(const std::string& kind, const std::string& body) {
    if (config_.log_file.empty()) return;
    // Image payloads are shortened; the token never reaches this function.
    static const std::regex data_url(R"(data:image/png;base64,[A-Za-z0-9+/=]+)");
    ordered_json entry{{"kind", kind},
                       {"endpoint", config_.endpoint},
                       {"authorization", config_.token_env.empty() ? "none" : "Bearer [redacted]"},
                       {"body", std::regex_replace(body, data_url, "data:image/png;base64,[omitted]")}};
    std::lock_guard lock(log_mutex_);
    std::ofstream(config_.log_file, std::ios::app) << entry.dump() << "\n";
}

std::string RemoteAgent::complete(const std::vector<ChatMessage>& messages) {
    std::string token;
    if (!config_.token_env.empty()) {
        const char* v = std::getenv(config_.token_env.c_str());
        if (!v || !*v) throw ConfigError("environment variable " + config_.token_env + " is not set");
        token = v;
    }
    const std::string body = request_body(messages);
    httplib::Headers headers;
    if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);

    httplib::Client cli(scheme_host_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());

    std::string last_error;
    auto backoff = config_.backoff;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
        if (attempt > 1) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        log("request", body);
        const auto res = cli.Post(path_, headers, body, "application/json");
        if (!res) {
            last_error = "connection: " + httplib::to_string(res.error());
            log("error", last_error);
            continue;
        }
        log("response", std::to_string(res->status) + " " + res->body);
        if (res->status == 401 || res->status == 403)
            throw ConfigError("authentication rejected (HTTP " + std::to_string(res->status) + ")");
        if (res->status == 408 || res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status < 200 || res->status >= 300)
            throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
        try {
            const auto j = ordered_json::parse(res->body);
            const auto& content = j.at("choices").at(0).at("message").at("content");
            if (content.is_string()) return content.get<std::string>();
            std::string text;
            for (const auto& part : content)
                if (part.value("type", "") == "text") text += part.at("text").get<std::string>();
            return text;
        } catch (const nlohmann::json::exception& e) {
            last_error = std::string("unexpected response body: ") + e.what();
        }
    }
    throw TransportError("giving up after " + std::to_string(config_.max_attempts) + " attempts: " + last_error);
}

std::string RemoteAgent::respond(const TurnContext& ctx) {
    auto messages = serialize_turn_context(ctx);
    const std::string first = complete(messages);
    std::string problem;
    try {
        parse_turn_output(first);
        return first;
    } catch (const NoJsonError& e) {
        problem = e.what();
    } catch (const SchemaError& e) {
        problem = e.what();
    }
    messages.push_back({"assistant", {{ContentPart::Kind::text, first, {}}}});
    messages.push_back({"user",
                        {{ContentPart::Kind::text,
                          "Your previous reply could not be used (" + problem +
                              "). Reply again with exactly one JSON object inside ```json and ``` using the keys "
                              "memory, iteration_number, commands and final_answer.",
                          {}}}});
    const std::string second = complete(messages);
    try {
        parse_turn_output(second);
        return second;
    } catch (const NoJsonError& e) {
        throw MalformedReplyError(second, std::string("after repair: ") + e.what());
    } catch (const SchemaError& e) {
        throw MalformedReplyError(second, std::string("after repair: ") + e.what());
    }
}

// ---------------------------------------------------------------- probes

ProbePrediction parse_probe_reply(std::string_view raw) {
    static const std::regex component(
        R"((rotate\s*[:\s]\s*)?(left|right|up|down|counter-?clockwise|anti-?clockwise|ccw|clockwise|cw)\s*(?:[:=]\s*|\s+)(?:by\s+)?([+-]?\d+(?:\.\d+)?))",
        std::regex::icase);
    ProbePrediction p;
    p.raw = std::string(raw);
    for (auto it = std::sregex_iterator(p.raw.begin(), p.raw.end(), component); it != std::sregex_iterator(); ++it) {
        ++p.components;
        if (p.command) continue;
        std::string dir = (*it)[2].str();
        std::transform(dir.begin(), dir.end(), dir.begin(), [](unsigned char c) { return char(std::tolower(c)); });
        Direction d;
        if (dir == "left") d = Direction::left;
        else if (dir == "right") d = Direction::right;
        else if (dir == "up") d = Direction::up;
        else if (dir == "down") d = Direction::down;
        else if (dir == "cw" || dir == "clockwise") d = Direction::cw;
        else d = Direction::ccw;
        p.command = RotationCommand{d, std::stod((*it)[3].str())};
    }
    return p;
}

std::vector<ChatMessage> probe_messages(const ProbePair& pair) {
    const std::string instructions =
        "Two images show the same cube object before and after one rotation. The camera is fixed; the object "
        "turned about its own center. Estimate the rotation direction and angle.\n"
        "Answer with a single command of the form direction:angle, where direction is one of left, right, up, "
        "down, rotate:cw or rotate:ccw and angle is in degrees, for example right:30.";
    return {{"system", {{ContentPart::Kind::text, instructions, {}}}},
            {"user",
             {{ContentPart::Kind::text, "Before:", {}},
              {ContentPart::Kind::image, "before", encode_png(pair.before)},
              {ContentPart::Kind::text, "After:", {}},
              {ContentPart::Kind::image, "after", encode_png(pair.after)},
              {ContentPart::Kind::text, "Which rotation turns the first view into the second?", {}}}}};
}

ProbePrediction ChatProbeAgent::predict(const ProbePair& pair) {
    return parse_probe_reply(backend_.complete(probe_messages(pair)));
}

}  // namespace imagery

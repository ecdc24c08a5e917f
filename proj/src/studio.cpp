#include "imagery/studio.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "imagery/error.hpp"
#include "imagery/forge.hpp"
#include "imagery/session.hpp"
#include "json.hpp"

namespace imagery {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void send_json(httplib::Response& res, int status, const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(2), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& category, const std::string& message,
                ordered_json extra = ordered_json::object()) {
    extra["error"] = category;
    extra["message"] = message;
    send_json(res, status, extra);
}

void send_png(httplib::Response& res, const RasterImage& img) {
    const auto bytes = encode_png(img);
    res.status = 200;
    res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
}

std::optional<std::string> read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::optional<ObjectLabel> label_param(const std::string& s) { return label_from_string(s); }

ordered_json quat_json(const Quat& q) { return ordered_json::array({q.w, q.x, q.y, q.z}); }

ordered_json parse_error_json(const ParseError& e) {
    return {{"kind", to_string(e.kind())}, {"token", e.token()}, {"index", e.index()}};
}

// JSON {"sequence": ...} or {"command": ...}, else the body as plain text.
std::string command_text(const httplib::Request& req) {
    const auto j = ordered_json::parse(req.body, nullptr, false);
    if (j.is_object()) {
        if (j.contains("sequence") && j["sequence"].is_string()) return j["sequence"].get<std::string>();
        if (j.contains("command") && j["command"].is_string()) return j["command"].get<std::string>();
    }
    return req.body;
}

ordered_json body_object(const httplib::Request& req) {
    if (req.body.empty()) return ordered_json::object();
    auto j = ordered_json::parse(req.body, nullptr, false);
    if (!j.is_object()) throw ConfigError("request body must be a JSON object");
    return j;
}

}  // namespace

struct StudioService::State {
    struct LiveSession {
        std::mutex mu;
        std::unique_ptr<Session> session;
        std::string player;
        bool human = false;
        Clock::time_point started = Clock::now();
        Clock::time_point last = Clock::now();
        bool answer_recorded = false;
    };

    StudioConfig config;
    ProblemSet set;
    std::shared_mutex set_mu;

    std::mutex sessions_mu;
    std::map<std::string, std::shared_ptr<LiveSession>> sessions;
    std::uint64_t next_session = 1;

    std::mutex pending_mu;
    std::map<std::pair<std::string, ObjectLabel>, Pose> pending;  // uncommitted calibration nudges

    std::mutex files_mu;  // answers.jsonl, calibration_log.jsonl

    httplib::Server server;
    std::thread thread;

    std::shared_ptr<LiveSession> find_session(const std::string& sid) {
        std::lock_guard lock(sessions_mu);
        const auto it = sessions.find(sid);
        return it == sessions.end() ? nullptr : it->second;
    }

    std::optional<Problem> find_problem(const std::string& id) {
        std::shared_lock lock(set_mu);
        for (const auto& p : set.problems)
            if (p.id == id) return p;
        return std::nullopt;
    }

    std::string url(const std::string& sid, const std::string& tail) const { return "/v1/sessions/" + sid + tail; }

    ordered_json grids_json(const std::string& sid, const IterationRecord& rec) const {
        ordered_json grids = ordered_json::array();
        for (const auto& g : rec.grids)
            grids.push_back({{"target", to_string(g.target)},
                             {"caption", g.caption()},
                             {"url", url(sid, "/iterations/" + std::to_string(rec.index) + "/" +
                                                  to_string(g.target) + ".png")}});
        return grids;
    }

    ordered_json record_json(const std::string& sid, const Session& s, const IterationRecord& rec) const {
        const auto& t = s.transcript();
        return {{"iteration", rec.index},
                {"errors", rec.errors},
                {"grids", grids_json(sid, rec)},
                {"status", to_string(t.status)},
                {"final_answer", t.final_answer ? ordered_json(to_string(*t.final_answer)) : ordered_json(nullptr)},
                {"next_iteration", s.finished() ? ordered_json(nullptr) : ordered_json(s.iteration() + 1)}};
    }

    ordered_json session_json(const std::string& sid, const LiveSession& live) const {
        const Session& s = *live.session;
        ordered_json j{{"session_id", sid},
                       {"problem_id", s.problem().id},
                       {"player", live.player},
                       {"human", live.human},
                       {"config", ordered_json::parse(loop_config_json(s.config()))},
                       {"iteration", s.iteration()},
                       {"status", to_string(s.transcript().status)},
                       {"finished", s.finished()}};
        j["final_answer"] = s.transcript().final_answer ? ordered_json(to_string(*s.transcript().final_answer))
                                                        : ordered_json(nullptr);
        for (ObjectLabel l : kAllLabels)
            j["snapshots"][to_string(l)] = url(sid, std::string("/objects/") + to_string(l) + "/snapshot.png");
        return j;
    }

    ordered_json context_json(const std::string& sid, const Session& s) const {
        const TurnContext ctx = s.build_context();
        ordered_json j{{"session_id", sid},
                       {"iteration_number", ctx.iteration_number},
                       {"min_iterations", ctx.min_iterations},
                       {"reset_enabled", ctx.reset_enabled},
                       {"allow_original_target", ctx.allow_original_target},
                       {"instructions", ctx.instructions},
                       {"statement", ctx.statement},
                       {"problem_image", "/v1/problems/" + s.problem().id + "/image"},
                       {"previous_outputs", ctx.previous_outputs},
                       {"feedback", ctx.feedback}};
        j["grids"] = s.transcript().iterations.empty() ? ordered_json::array()
                                                       : grids_json(sid, s.transcript().iterations.back());
        j["original_snapshot"] = url(sid, "/objects/original/snapshot.png");
        return j;
    }

    bool writable() const { return !config.read_only; }

    void append_line(const fs::path& file, const ordered_json& entry) {
        std::lock_guard lock(files_mu);
        fs::create_directories(file.parent_path());
        std::ofstream out(file, std::ios::app);
        if (!out) throw Error("cannot append to " + file.string());
        out << entry.dump() << "\n";
    }

    void routes();
    void session_routes();
    void calibration_routes();
};

StudioService::StudioService(StudioConfig config) : state_(std::make_unique<State>()) {
    state_->config = std::move(config);
    state_->set = load_problem_set(state_->config.dataset);
    state_->routes();
}

StudioService::~StudioService() { stop(); }

httplib::Server& StudioService::server() { return state_->server; }

int StudioService::start() {
    auto& s = state_->server;
    int port = state_->config.port;
    if (port == 0) {
        port = s.bind_to_any_port(state_->config.host);
        if (port < 0) throw ConfigError("cannot bind " + state_->config.host);
    } else if (!s.bind_to_port(state_->config.host, port)) {
        throw ConfigError("port " + std::to_string(port) + " is busy");
    }
    state_->thread = std::thread([&s] { s.listen_after_bind(); });
    s.wait_until_ready();
    return port;
}

void StudioService::listen() {
    if (!state_->server.bind_to_port(state_->config.host, state_->config.port))
        throw ConfigError("port " + std::to_string(state_->config.port) + " is busy");
    state_->server.listen_after_bind();
}

void StudioService::stop() {
    if (!state_) return;
    state_->server.stop();
    if (state_->thread.joinable()) state_->thread.join();
}

void StudioService::State::routes() {
    // Without SO_REUSEPORT a busy port fails to bind.
    server.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof yes);
    });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const ConfigError& e) {
            send_error(res, 400, "bad_request", e.what());
        } catch (const ContractError& e) {
            send_error(res, 409, "conflict", e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "internal", e.what());
        }
    });

    server.Get("/v1/problems", [this](const httplib::Request&, httplib::Response& res) {
        std::shared_lock lock(set_mu);
        ordered_json list = ordered_json::array();
        for (const auto& p : set.problems)
            list.push_back({{"id", p.id},
                            {"statement", p.statement},
                            {"image", "/v1/problems/" + p.id + "/image"}});
        send_json(res, 200,
                  {{"dataset", config.dataset.string()},
                   {"dataset_checksum", problem_set_checksum(set)},
                   {"read_only", config.read_only},
                   {"problems", list}});
    });

    server.Get(R"(/v1/problems/([^/]+)/image)", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        if (!find_problem(id)) return send_error(res, 404, "unknown_problem", "no problem '" + id + "'");
        std::shared_lock lock(set_mu);
        const auto bytes = read_file(config.dataset / "images" / (id + ".png"));
        if (!bytes) return send_error(res, 404, "missing_file", "image not found");
        res.set_content(*bytes, "image/png");
    });

    server.Get(R"(/v1/problems/([^/]+)/objects/([^/]+)\.png)",
               [this](const httplib::Request& req, httplib::Response& res) {
                   const std::string id = req.matches[1];
                   const auto l = label_param(req.matches[2]);
                   if (!find_problem(id) || !l) return send_error(res, 404, "unknown_object", "no such object");
                   std::shared_lock lock(set_mu);
                   const auto bytes =
                       read_file(config.dataset / "images" / (id + "_" + to_string(*l) + ".png"));
                   if (!bytes) return send_error(res, 404, "missing_file", "image not found");
                   res.set_content(*bytes, "image/png");
               });

    session_routes();
    calibration_routes();
}

void StudioService::State::session_routes() {
    server.Post("/v1/sessions", [this](const httplib::Request& req, httplib::Response& res) {
        const auto body = body_object(req);
        const std::string pid = body.value("problem_id", "");
        const auto problem = find_problem(pid);
        if (!problem) return send_error(res, 404, "unknown_problem", "no problem '" + pid + "'");
        const std::string player = body.value("player", "human");
        const bool human = body.value("human", player == "human");
        LoopConfig base = condition_config(body.value("condition", "C3-incremental"));
        if (human) {
            base.min_iterations = config.human_min_iterations;
            base.max_iterations = config.human_max_iterations;
        }
        const std::string overrides = body.contains("overrides") ? body["overrides"].dump() : "{}";
        const LoopConfig loop = loop_config_from_json(overrides, base);
        loop.validate();

        auto live = std::make_shared<LiveSession>();
        live->session = std::make_unique<Session>(*problem, loop);
        live->session->set_agent_name(player);
        live->player = player;
        live->human = human;
        std::string sid;
        {
            std::lock_guard lock(sessions_mu);
            char buf[32];
            std::snprintf(buf, sizeof buf, "s%04llu", static_cast<unsigned long long>(next_session++));
            sid = buf;
            sessions[sid] = live;
        }
        send_json(res, 201, session_json(sid, *live));
    });

    server.Get(R"(/v1/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string sid = req.matches[1];
        const auto live = find_session(sid);
        if (!live) return send_error(res, 404, "unknown_session", "no session '" + sid + "'");
        std::lock_guard lock(live->mu);
        send_json(res, 200, session_json(sid, *live));
    });

    server.Get(R"(/v1/sessions/([^/]+)/context)", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string sid = req.matches[1];
        const auto live = find_session(sid);
        if (!live) return send_error(res, 404, "unknown_session", "no session '" + sid + "'");
        std::lock_guard lock(live->mu);
        send_json(res, 200, context_json(sid, *live->session));
    });

    server.Post(R"(/v1/sessions/([^/]+)/turns)", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string sid = req.matches[1];
        const auto live = find_session(sid);
        if (!live) return send_error(res, 404, "unknown_session", "no session '" + sid + "'");
        std::string raw = req.body;
        const auto j = ordered_json::parse(req.body, nullptr, false);
        if (j.is_object() && j.contains("raw") && j["raw"].is_string()) raw = j["raw"].get<std::string>();
        else if (j.is_object()) raw = "```json\n" + j.dump(2) + "\n```";

        std::lock_guard lock(live->mu);
        Session& s = *live->session;
        if (s.finished()) return send_error(res, 409, "finished", "session is finished", session_json(sid, *live));
        try {
            const auto& rec = s.submit(raw, /*strict=*/true);
            const auto now = Clock::now();
            s.set_last_seconds(std::chrono::duration<double>(now - live->last).count());
            live->last = now;
            send_json(res, 200, record_json(sid, s, rec));
        } catch (const IterationMismatchError& e) {
            send_error(res, 409, "stale_iteration", e.what(),
                       {{"expected", e.expected()}, {"context", context_json(sid, s)}});
        }
    });

    server.Post(R"(/v1/sessions/([^/]+)/objects/([^/]+)/commands)",
                [this](const httplib::Request& req, httplib::Response& res) {
                    const std::string sid = req.matches[1];
                    const auto live = find_session(sid);
                    if (!live) return send_error(res, 404, "unknown_session", "no session '" + sid + "'");
                    const auto l = label_param(req.matches[2]);
                    if (!l) return send_error(res, 404, "unknown_object", "no object '" + req.matches[2].str() + "'");
                    std::vector<RotationCommand> steps;
                    try {
                        steps = parse_sequence(command_text(req));
                    } catch (const ParseError& e) {
                        return send_error(res, 422, "parse_error", e.what(), parse_error_json(e));
                    }
                    std::lock_guard lock(live->mu);
                    Session& s = *live->session;
                    if (s.finished()) return send_error(res, 409, "finished", "session is finished");
                    if (*l == ObjectLabel::original && !s.config().allow_original_target)
                        return send_error(res, 422, "not_allowed", "the original cannot be rotated here");
                    for (const auto& c : steps)
                        if (c.direction == Direction::reset && !s.config().reset_enabled)
                            return send_error(res, 422, "not_allowed", "reset is disabled in this condition");
                    TurnOutput turn;
                    turn.memory.rationale = "interactive";
                    turn.iteration_number = s.iteration() + 1;
                    turn.commands.push_back({*l, steps});
                    const auto& rec = s.execute_turn(turn, serialize_turn_output(turn));
                    const auto now = Clock::now();
                    s.set_last_seconds(std::chrono::duration<double>(now - live->last).count());
                    live->last = now;
                    for (const auto& g : rec.grids)
                        if (g.target == *l && !rec.executed.empty()) {
                            res.set_header("X-Iteration", std::to_string(rec.index));
                            return send_png(res, g.grid);
                        }
                    send_error(res, 422, "rejected", rec.errors.empty() ? "command rejected" : rec.errors.front(),
                               {{"errors", rec.errors}});
                });

    server.Get(R"(/v1/sessions/([^/]+)/objects/([^/]+)/snapshot\.png)",
               [this](const httplib::Request& req, httplib::Response& res) {
                   const auto live = find_session(req.matches[1]);
                   const auto l = label_param(req.matches[2]);
                   if (!live || !l) return send_error(res, 404, "not_found", "no such session or object");
                   std::lock_guard lock(live->mu);
                   send_png(res, live->session->snapshot(*l));
               });

    server.Get(R"(/v1/sessions/([^/]+)/iterations/(\d+)/([^/]+)\.png)",
               [this](const httplib::Request& req, httplib::Response& res) {
                   const auto live = find_session(req.matches[1]);
                   const auto l = label_param(req.matches[3]);
                   if (!live || !l) return send_error(res, 404, "not_found", "no such session or object");
                   std::lock_guard lock(live->mu);
                   const auto& its = live->session->transcript().iterations;
                   const std::size_t k = std::stoul(req.matches[2]);
                   if (k < 1 || k > its.size()) return send_error(res, 404, "not_found", "no such iteration");
                   for (const auto& g : its[k - 1].grids)
                       if (g.target == *l) return send_png(res, g.grid);
                   send_error(res, 404, "not_found", "no grid for that object");
               });

    server.Post(R"(/v1/sessions/([^/]+)/answer)", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string sid = req.matches[1];
        const auto live = find_session(sid);
        if (!live) return send_error(res, 404, "unknown_session", "no session '" + sid + "'");
        const auto body = body_object(req);
        const auto answer = label_from_string(body.value("answer", ""));
        if (!answer || *answer == ObjectLabel::original)
            return send_error(res, 422, "bad_answer", "answer must be A, B or C");

        std::lock_guard lock(live->mu);
        Session& s = *live->session;
        if (s.finished()) return send_error(res, 409, "finished", "session is finished", session_json(sid, *live));
        TurnOutput turn;
        turn.memory.rationale = body.value("rationale", "answer");
        turn.memory.partial_conclusion[option_index(*answer)] = Conclusion::probably_the_odd_one;
        turn.iteration_number = s.iteration() + 1;
        turn.final_answer = *answer;
        const auto& rec = s.execute_turn(turn, serialize_turn_output(turn));
        const auto now = Clock::now();
        s.set_last_seconds(std::chrono::duration<double>(now - live->last).count());
        live->last = now;
        if (s.transcript().status != SessionStatus::answered)
            return send_error(res, 409, "too_early", rec.errors.empty() ? "answer deferred" : rec.errors.front(),
                              {{"min_iterations", s.config().min_iterations}, {"iteration", s.iteration()}});

        const auto& t = s.transcript();
        ordered_json commands = ordered_json::array();
        for (const auto& it : t.iterations)
            for (const auto& seq : it.executed)
                commands.push_back({{"iteration", it.index},
                                    {"target", to_string(seq.target)},
                                    {"sequence", format_sequence(seq.steps)},
                                    {"seconds", it.seconds}});
        const ordered_json record{
            {"session_id", sid},
            {"problem_id", s.problem().id},
            {"player", body.value("player", live->player)},
            {"answer", to_string(*answer)},
            {"correct", t.correct()},
            {"iterations", s.iteration()},
            {"commands", commands},
            {"elapsed_seconds", std::chrono::duration<double>(now - live->started).count()},
            {"timestamp", utc_now()}};
        append_line(config.state_dir / "answers.jsonl", record);
        live->answer_recorded = true;
        send_json(res, 200, {{"correct", t.correct()}, {"odd", to_string(t.odd)}, {"status", to_string(t.status)}});
    });

    server.Get(R"(/v1/sessions/([^/]+)/transcript)", [this](const httplib::Request& req, httplib::Response& res) {
        const auto live = find_session(req.matches[1]);
        if (!live) return send_error(res, 404, "unknown_session", "no such session");
        std::lock_guard lock(live->mu);
        res.set_content(transcript_json(live->session->transcript()), "application/json");
    });

    server.Get(R"(/v1/sessions/([^/]+)/bundle)", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string sid = req.matches[1];
        const auto live = find_session(sid);
        if (!live) return send_error(res, 404, "unknown_session", "no such session");
        const fs::path dir = config.state_dir / "transcripts" / sid;
        {
            std::lock_guard lock(live->mu);
            fs::remove_all(dir);
            save_transcript(live->session->transcript(), dir);
        }
        ordered_json files = ordered_json::array();
        std::vector<std::string> rels;
        for (const auto& e : fs::recursive_directory_iterator(dir))
            if (e.is_regular_file()) rels.push_back(fs::relative(e.path(), dir).generic_string());
        std::sort(rels.begin(), rels.end());
        for (const auto& rel : rels) {
            const auto bytes = read_file(dir / rel).value_or("");
            files.push_back({{"path", rel},
                             {"url", url(sid, "/bundle/" + rel)},
                             {"sha256", sha256_hex({reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()})}});
        }
        send_json(res, 200, {{"session_id", sid}, {"files", files}});
    });

    server.Get(R"(/v1/sessions/([^/]+)/bundle/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string sid = req.matches[1];
        const fs::path rel = fs::path(req.matches[2].str()).lexically_normal();
        if (rel.is_absolute() || rel.empty() || *rel.begin() == "..")
            return send_error(res, 400, "bad_path", "invalid bundle path");
        const auto bytes = read_file(config.state_dir / "transcripts" / sid / rel);
        if (!bytes) return send_error(res, 404, "not_found", "fetch /bundle first");
        const std::string ext = rel.extension().string();
        res.set_content(*bytes, ext == ".png" ? "image/png" : ext == ".json" ? "application/json" : "text/markdown");
    });
}

void StudioService::State::calibration_routes() {
    const std::string base = R"(/v1/calibration/([^/]+)/([^/]+))";

    auto resolve = [this](const httplib::Request& req, httplib::Response& res)
        -> std::optional<std::pair<Problem, ObjectLabel>> {
        const auto p = find_problem(req.matches[1]);
        const auto l = label_param(req.matches[2]);
        if (!p || !l) {
            send_error(res, 404, "unknown_object", "no such problem or object");
            return std::nullopt;
        }
        return std::make_pair(*p, *l);
    };

    auto current_pose = [this](const Problem& p, ObjectLabel l) {
        std::lock_guard lock(pending_mu);
        const auto it = pending.find({p.id, l});
        return it == pending.end() ? std::make_pair(p.pose(l), false) : std::make_pair(it->second, true);
    };

    auto pose_json = [](const Pose& pose, bool pending) {
        const auto e = pose_to_euler(pose);
        return ordered_json{{"pose", quat_json(pose.orientation)},
                            {"euler", {{"pitch", e.pitch}, {"yaw", e.yaw}, {"roll", e.roll}}},
                            {"pending", pending}};
    };

    server.Get(base, [=](const httplib::Request& req, httplib::Response& res) {
        const auto r = resolve(req, res);
        if (!r) return;
        const auto [pose, pending] = current_pose(r->first, r->second);
        send_json(res, 200, pose_json(pose, pending));
    });

    server.Get(base + R"(/render\.png)", [=, this](const httplib::Request& req, httplib::Response& res) {
        const auto r = resolve(req, res);
        if (!r) return;
        const auto pose = current_pose(r->first, r->second).first;
        send_png(res, render(r->first.object(r->second), pose, config.rig, config.settings));
    });

    server.Post(base + "/nudge", [=, this](const httplib::Request& req, httplib::Response& res) {
        if (!writable()) return send_error(res, 403, "read_only", "dataset is read-only");
        const auto r = resolve(req, res);
        if (!r) return;
        std::vector<RotationCommand> steps;
        try {
            steps = parse_sequence(command_text(req));
        } catch (const ParseError& e) {
            return send_error(res, 422, "parse_error", e.what(), parse_error_json(e));
        }
        Pose pose;
        {
            std::lock_guard lock(pending_mu);
            const auto key = std::make_pair(r->first.id, r->second);
            const auto it = pending.find(key);
            pose = it == pending.end() ? r->first.pose(r->second) : it->second;
            for (const auto& c : steps) {
                if (c.direction == Direction::reset)
                    return send_error(res, 422, "parse_error", "reset is not a calibration nudge");
                pose = apply_camera_rotation(pose, c);
            }
            pending[key] = pose;
        }
        send_png(res, render(r->first.object(r->second), pose, config.rig, config.settings));
    });

    server.Post(base + "/revert", [=, this](const httplib::Request& req, httplib::Response& res) {
        if (!writable()) return send_error(res, 403, "read_only", "dataset is read-only");
        const auto r = resolve(req, res);
        if (!r) return;
        {
            std::lock_guard lock(pending_mu);
            pending.erase({r->first.id, r->second});
        }
        send_json(res, 200, pose_json(r->first.pose(r->second), false));
    });

    server.Post(base + "/commit", [=, this](const httplib::Request& req, httplib::Response& res) {
        if (!writable()) return send_error(res, 403, "read_only", "dataset is read-only");
        const auto r = resolve(req, res);
        if (!r) return;
        const auto body = body_object(req);
        const std::string author = body.value("author", "unknown");
        const auto key = std::make_pair(r->first.id, r->second);
        std::optional<Pose> pose;
        {
            std::lock_guard lock(pending_mu);
            const auto it = pending.find(key);
            if (it != pending.end()) pose = it->second;
        }
        if (!pose) return send_error(res, 409, "nothing_pending", "no uncommitted nudges");
        std::string checksum;
        {
            std::unique_lock lock(set_mu);
            for (auto& p : set.problems)
                if (p.id == r->first.id) p.pose(r->second) = *pose;
            update_problem_poses(set, r->first.id, config.dataset, config.rig, config.settings);
            checksum = problem_set_checksum(set);
        }
        {
            std::lock_guard lock(pending_mu);
            pending.erase(key);
        }
        append_line(config.dataset / "calibration_log.jsonl",
                    {{"dataset", config.dataset.filename().string()},
                     {"dataset_checksum", checksum},
                     {"problem_id", r->first.id},
                     {"label", to_string(r->second)},
                     {"pose", quat_json(pose->orientation)},
                     {"author", author},
                     {"timestamp", utc_now()}});
        auto j = pose_json(*pose, false);
        j["dataset_checksum"] = checksum;
        send_json(res, 200, j);
    });
}

}  // namespace imagery

#include "imagery/session.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

#include "imagery/error.hpp"
#include "json.hpp"

namespace imagery {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

void LoopConfig::validate() const {
    if (min_iterations < 1) throw ConfigError("min_iterations must be at least 1");
    if (max_iterations < min_iterations) throw ConfigError("max_iterations must not be below min_iterations");
    if (max_sequences < 1) throw ConfigError("max_sequences must be at least 1");
    if (max_steps_per_sequence < 1) throw ConfigError("max_steps_per_sequence must be at least 1");
    rig.validate();
    if (settings.width < 8 || settings.height < 8) throw ConfigError("render size must be at least 8x8");
}

LoopConfig condition_config(std::string_view name) {
    LoopConfig c;
    if (name == "C1-reset") {
        c.reset_enabled = true;
        c.prompt_variant = PromptVariant::reset;
    } else if (name == "C2-360hint") {
        c.hint_360 = true;
        c.prompt_variant = PromptVariant::sweep360;
    } else if (name != "C3-incremental") {
        throw ConfigError("unknown condition '" + std::string(name) + "'");
    }
    return c;
}

namespace {

ordered_json config_to_json(const LoopConfig& c) {
    return {{"min_iterations", c.min_iterations},
            {"max_iterations", c.max_iterations},
            {"reset_enabled", c.reset_enabled},
            {"hint_360", c.hint_360},
            {"allow_original_target", c.allow_original_target},
            {"prompt_variant", to_string(c.prompt_variant)},
            {"prompt_options",
             {{"require_min_iterations", c.prompt_options.require_min_iterations},
              {"prefer_geometric_match", c.prompt_options.prefer_geometric_match},
              {"step_by_step", c.prompt_options.step_by_step},
              {"track_candidates", c.prompt_options.track_candidates},
              {"estimate_distance", c.prompt_options.estimate_distance}}},
            {"max_sequences", c.max_sequences},
            {"max_steps_per_sequence", c.max_steps_per_sequence},
            {"camera_distance_factor", c.rig.distance_factor},
            {"vertical_fov_deg", c.rig.vertical_fov_deg},
            {"width", c.settings.width},
            {"height", c.settings.height}};
}

template <class T>
void take(const ordered_json& j, const char* key, T& out) {
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string(key) + ": " + e.what());
    }
}

LoopConfig config_from_json(const ordered_json& j, LoopConfig c) {
    if (!j.is_object()) throw ConfigError("loop config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "min_iterations") take(j, "min_iterations", c.min_iterations);
        else if (key == "max_iterations") take(j, "max_iterations", c.max_iterations);
        else if (key == "reset_enabled") take(j, "reset_enabled", c.reset_enabled);
        else if (key == "hint_360") take(j, "hint_360", c.hint_360);
        else if (key == "allow_original_target") take(j, "allow_original_target", c.allow_original_target);
        else if (key == "max_sequences") take(j, "max_sequences", c.max_sequences);
        else if (key == "max_steps_per_sequence") take(j, "max_steps_per_sequence", c.max_steps_per_sequence);
        else if (key == "camera_distance_factor") take(j, "camera_distance_factor", c.rig.distance_factor);
        else if (key == "vertical_fov_deg") take(j, "vertical_fov_deg", c.rig.vertical_fov_deg);
        else if (key == "width") take(j, "width", c.settings.width);
        else if (key == "height") take(j, "height", c.settings.height);
        else if (key == "prompt_variant") {
            std::string name;
            take(j, "prompt_variant", name);
            const auto v = prompt_variant_from_string(name);
            if (!v) throw ConfigError("prompt_variant: unknown value '" + name + "'");
            c.prompt_variant = *v;
        } else if (key == "prompt_options") {
            if (!value.is_object()) throw ConfigError("prompt_options must be an object");
            auto& o = c.prompt_options;
            for (const auto& [k, v] : value.items()) {
                if (k == "require_min_iterations") take(value, "require_min_iterations", o.require_min_iterations);
                else if (k == "prefer_geometric_match") take(value, "prefer_geometric_match", o.prefer_geometric_match);
                else if (k == "step_by_step") take(value, "step_by_step", o.step_by_step);
                else if (k == "track_candidates") take(value, "track_candidates", o.track_candidates);
                else if (k == "estimate_distance") take(value, "estimate_distance", o.estimate_distance);
                else throw ConfigError("prompt_options: unknown key '" + k + "'");
            }
        } else {
            throw ConfigError("unknown loop config key '" + key + "'");
        }
    }
    c.validate();
    return c;
}

}  // namespace

std::string loop_config_json(const LoopConfig& c) { return config_to_json(c).dump(2); }

LoopConfig loop_config_from_json(std::string_view json, LoopConfig base) {
    ordered_json j;
    try {
        j = ordered_json::parse(json);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("loop config: ") + e.what());
    }
    return config_from_json(j, std::move(base));
}

const char* to_string(SessionStatus s) noexcept {
    switch (s) {
        case SessionStatus::running: return "running";
        case SessionStatus::answered: return "answered";
        case SessionStatus::budget_vote: return "budget_vote";
        case SessionStatus::failed: return "failed";
    }
    return "?";
}

std::string SnapshotGrid::caption() const {
    std::string c = std::string(to_string(target)) + ": ";
    return c + (steps.empty() ? "current view" : format_sequence(steps));
}

Session::Session(Problem problem, LoopConfig config) : problem_(std::move(problem)), config_(std::move(config)) {
    config_.validate();
    for (ObjectLabel l : kAllLabels) {
        auto& o = objects_[static_cast<std::size_t>(l)];
        o.label = l;
        o.polycube = problem_.object(l);
        o.initial_pose = o.current_pose = problem_.pose(l);
    }
    transcript_.problem_id = problem_.id;
    transcript_.config = config_;
    transcript_.odd = problem_.odd;
    problem_image_ = render_problem(problem_, config_.rig, config_.settings);
}

RasterImage Session::snapshot(ObjectLabel l) const {
    const auto& o = object(l);
    return render(o.polycube, o.current_pose, config_.rig, config_.settings);
}

SnapshotGrid Session::run_steps(ObjectLabel l, const std::vector<RotationCommand>& steps) {
    auto& o = objects_[static_cast<std::size_t>(l)];
    SnapshotGrid g;
    g.target = l;
    g.steps = steps;
    std::vector<std::pair<RasterImage, std::string>> cells;
    if (steps.empty()) cells.emplace_back(snapshot(l), std::string(to_string(l)) + " now");
    for (std::size_t i = 0; i < steps.size(); ++i) {
        o.current_pose = apply_camera_rotation(o.current_pose, steps[i]);
        o.history.emplace_back(steps[i], o.current_pose);
        cells.emplace_back(snapshot(l), std::to_string(i + 1) + " " + format_command(steps[i]));
    }
    g.grid = compose_grid(cells);
    return g;
}

RasterImage Session::apply(ObjectLabel l, const RotationCommand& cmd) {
    if (finished()) throw ContractError("session is finished");
    if (cmd.direction == Direction::reset && !config_.reset_enabled)
        throw ContractError("reset is disabled in this condition");
    auto& o = objects_[static_cast<std::size_t>(l)];
    o.current_pose = apply_camera_rotation(o.current_pose, cmd);
    o.history.emplace_back(cmd, o.current_pose);
    return snapshot(l);
}

const IterationRecord& Session::execute_turn(const TurnOutput& turn, std::string raw_output) {
    if (finished()) throw ContractError("session is finished");
    if (turn.iteration_number != iteration() + 1) throw IterationMismatchError(iteration() + 1, turn.iteration_number);

    IterationRecord rec;
    rec.index = iteration() + 1;
    rec.raw_output = raw_output.empty() ? serialize_turn_output(turn) : std::move(raw_output);
    rec.turn = turn;

    for (const auto& r : turn.rejected)
        rec.errors.push_back("commands[" + std::to_string(r.index) + "] (" + r.target + ": " + r.rotation_sequence +
                             ") rejected: " + r.reason);

    std::array<std::vector<RotationCommand>, 4> per_target;
    for (std::size_t i = 0; i < turn.commands.size(); ++i) {
        const auto& seq = turn.commands[i];
        const std::string where = "commands[" + std::to_string(i) + "] (" + to_string(seq.target) + ")";
        bool has_reset = false;
        for (const auto& s : seq.steps) has_reset = has_reset || s.direction == Direction::reset;
        if (rec.executed.size() >= config_.max_sequences)
            rec.errors.push_back(where + " skipped: at most " + std::to_string(config_.max_sequences) +
                                 " sequences per iteration");
        else if (seq.target == ObjectLabel::original && !config_.allow_original_target)
            rec.errors.push_back(where + " rejected: the original cannot be rotated; only A, B and C");
        else if (has_reset && !config_.reset_enabled)
            rec.errors.push_back(where + " rejected: reset is not available in this condition");
        else if (seq.steps.size() > config_.max_steps_per_sequence)
            rec.errors.push_back(where + " rejected: more than " + std::to_string(config_.max_steps_per_sequence) +
                                 " steps");
        else {
            rec.executed.push_back(seq);
            auto& steps = per_target[static_cast<std::size_t>(seq.target)];
            steps.insert(steps.end(), seq.steps.begin(), seq.steps.end());
        }
    }
    for (ObjectLabel l : kAllLabels) rec.grids.push_back(run_steps(l, per_target[static_cast<std::size_t>(l)]));

    last_memory_ = turn.memory;
    if (turn.final_answer) {
        if (rec.index >= config_.min_iterations) {
            transcript_.status = SessionStatus::answered;
            transcript_.final_answer = turn.final_answer;
        } else {
            rec.errors.push_back(std::string("final_answer ") + to_string(*turn.final_answer) +
                                 " not accepted yet: at least " + std::to_string(config_.min_iterations) +
                                 " iterations are required and this was iteration " + std::to_string(rec.index));
        }
    }
    conclude_if_due(rec);
    transcript_.iterations.push_back(std::move(rec));
    return transcript_.iterations.back();
}

const IterationRecord& Session::submit(const std::string& raw, bool strict) {
    if (finished()) throw ContractError("session is finished");
    std::string problem;
    try {
        TurnOutput turn = parse_turn_output(raw);
        std::string note;
        if (turn.iteration_number != iteration() + 1) {
            if (strict) throw IterationMismatchError(iteration() + 1, turn.iteration_number);
            note = "iteration_number " + std::to_string(turn.iteration_number) + " was treated as " +
                   std::to_string(iteration() + 1);
            turn.iteration_number = iteration() + 1;
        }
        execute_turn(turn, raw);
        if (!note.empty()) transcript_.iterations.back().errors.insert(transcript_.iterations.back().errors.begin(), note);
        return transcript_.iterations.back();
    } catch (const NoJsonError& e) {
        problem = std::string("reply rejected: ") + e.what();
    } catch (const SchemaError& e) {
        problem = std::string("reply rejected: ") + e.what();
    }
    IterationRecord rec;
    rec.index = iteration() + 1;
    rec.raw_output = raw;
    rec.errors.push_back(problem);
    for (ObjectLabel l : kAllLabels) rec.grids.push_back(run_steps(l, {}));
    conclude_if_due(rec);
    transcript_.iterations.push_back(std::move(rec));
    return transcript_.iterations.back();
}

void Session::conclude_if_due(IterationRecord& rec) {
    if (finished() || rec.index < config_.max_iterations) return;
    if (last_memory_) {
        const auto& pc = last_memory_->partial_conclusion;
        std::vector<ObjectLabel> odd, unknown;
        for (ObjectLabel l : kOptionLabels) {
            if (pc[option_index(l)] == Conclusion::probably_the_odd_one) odd.push_back(l);
            if (pc[option_index(l)] == Conclusion::unknown) unknown.push_back(l);
        }
        std::optional<ObjectLabel> pick;
        if (odd.size() == 1)
            pick = odd[0];
        else if (odd.empty() && unknown.size() == 1)
            pick = unknown[0];
        if (pick) {
            transcript_.status = SessionStatus::budget_vote;
            transcript_.final_answer = pick;
            rec.errors.push_back(std::string("iteration budget exhausted; answer ") + to_string(*pick) +
                                 " taken from partial_conclusion");
            return;
        }
    }
    transcript_.status = SessionStatus::failed;
    transcript_.failure = "iteration budget exhausted without a decisive partial_conclusion";
}

void Session::fail(const std::string& why) {
    if (finished()) return;
    transcript_.status = SessionStatus::failed;
    transcript_.failure = why;
}

void Session::set_last_seconds(double s) {
    if (!transcript_.iterations.empty()) transcript_.iterations.back().seconds = s;
}

TurnContext Session::build_context() const {
    TurnContext ctx;
    ctx.problem_id = problem_.id;
    ctx.iteration_number = iteration() + 1;
    ctx.min_iterations = config_.min_iterations;
    ctx.reset_enabled = config_.reset_enabled;
    ctx.allow_original_target = config_.allow_original_target;
    const PromptVariant variant = config_.hint_360 ? PromptVariant::sweep360 : config_.prompt_variant;
    ctx.instructions = build_instructions(variant, config_.prompt_options, config_.min_iterations,
                                          config_.reset_enabled, config_.allow_original_target);
    ctx.statement = problem_.statement;
    ctx.problem_image = problem_image_;
    for (const auto& rec : transcript_.iterations) ctx.previous_outputs.push_back(rec.raw_output);
    if (!transcript_.iterations.empty()) {
        const auto& last = transcript_.iterations.back();
        for (const auto& e : last.errors) ctx.feedback += (ctx.feedback.empty() ? "" : "\n") + e;
        for (const auto& g : last.grids) ctx.last_grids.push_back({g.target, g.caption(), g.grid});
    }
    ctx.original_snapshot = snapshot(ObjectLabel::original);
    return ctx;
}

SessionTranscript run_loop(Session& session, Agent& agent) {
    session.set_agent_name(agent.name());
    while (!session.finished()) {
        const TurnContext ctx = session.build_context();
        const auto t0 = std::chrono::steady_clock::now();
        std::string raw;
        try {
            raw = agent.respond(ctx);
        } catch (const TransportError& e) {
            session.fail(std::string("transport: ") + e.what());
            break;
        } catch (const MalformedReplyError& e) {
            raw = e.raw();
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        session.submit(raw);
        session.set_last_seconds(seconds);
    }
    return session.transcript();
}

std::array<Pose, 4> replay_poses(const Problem& problem, const SessionTranscript& transcript) {
    std::array<Pose, 4> poses = problem.calibrated_poses;
    for (const auto& rec : transcript.iterations)
        for (const auto& seq : rec.executed)
            for (const auto& step : seq.steps)
                poses[static_cast<std::size_t>(seq.target)] =
                    apply_camera_rotation(poses[static_cast<std::size_t>(seq.target)], step);
    return poses;
}

namespace {

std::string grid_file(int index, ObjectLabel l) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "iterations/%02d_%s.png", index, to_string(l));
    return buf;
}

}  // namespace

std::string transcript_json(const SessionTranscript& t) {
    ordered_json j;
    j["problem_id"] = t.problem_id;
    j["agent"] = t.agent;
    j["config"] = config_to_json(t.config);
    j["status"] = to_string(t.status);
    j["final_answer"] = t.final_answer ? ordered_json(to_string(*t.final_answer)) : ordered_json(nullptr);
    j["odd"] = to_string(t.odd);
    j["correct"] = t.correct();
    j["failure"] = t.failure;
    j["iterations"] = ordered_json::array();
    for (const auto& rec : t.iterations) {
        ordered_json r;
        r["index"] = rec.index;
        r["raw_output"] = rec.raw_output;
        r["parsed"] = rec.turn.has_value();
        r["executed"] = ordered_json::array();
        for (const auto& seq : rec.executed)
            r["executed"].push_back({{"target", to_string(seq.target)}, {"rotation_sequence", format_sequence(seq.steps)}});
        r["snapshots"] = ordered_json::array();
        for (const auto& g : rec.grids)
            r["snapshots"].push_back({{"target", to_string(g.target)},
                                      {"steps", format_sequence(g.steps)},
                                      {"file", grid_file(rec.index, g.target)}});
        r["errors"] = rec.errors;
        j["iterations"].push_back(std::move(r));
    }
    return j.dump(2) + "\n";
}

SessionTranscript transcript_from_json(std::string_view json) {
    SessionTranscript t;
    try {
        const ordered_json j = ordered_json::parse(json);
        t.problem_id = j.at("problem_id").get<std::string>();
        t.agent = j.at("agent").get<std::string>();
        t.config = config_from_json(j.at("config"), {});
        const std::string status = j.at("status").get<std::string>();
        for (SessionStatus s : {SessionStatus::running, SessionStatus::answered, SessionStatus::budget_vote,
                                SessionStatus::failed})
            if (status == to_string(s)) t.status = s;
        if (!j.at("final_answer").is_null()) t.final_answer = label_from_string(j.at("final_answer").get<std::string>());
        t.odd = label_from_string(j.at("odd").get<std::string>()).value_or(ObjectLabel::A);
        t.failure = j.at("failure").get<std::string>();
        for (const auto& r : j.at("iterations")) {
            IterationRecord rec;
            rec.index = r.at("index").get<int>();
            rec.raw_output = r.at("raw_output").get<std::string>();
            if (r.at("parsed").get<bool>()) rec.turn = parse_turn_output(rec.raw_output);
            for (const auto& e : r.at("executed")) {
                const auto target = label_from_string(e.at("target").get<std::string>());
                if (!target) throw DecodeError("bad target in transcript");
                rec.executed.push_back({*target, parse_sequence(e.at("rotation_sequence").get<std::string>())});
            }
            for (const auto& g : r.at("snapshots")) {
                SnapshotGrid grid;
                grid.target = label_from_string(g.at("target").get<std::string>()).value_or(ObjectLabel::original);
                const std::string steps = g.at("steps").get<std::string>();
                if (!steps.empty()) grid.steps = parse_sequence(steps);
                rec.grids.push_back(std::move(grid));
            }
            rec.errors = r.at("errors").get<std::vector<std::string>>();
            t.iterations.push_back(std::move(rec));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DecodeError(std::string("transcript: ") + e.what());
    }
    return t;
}

std::string format_transcript_markdown(const SessionTranscript& t) {
    std::string md = "# Session " + t.problem_id + "\n\n";
    md += "- agent: " + (t.agent.empty() ? std::string("unknown") : t.agent) + "\n";
    md += "- status: " + std::string(to_string(t.status)) + "\n";
    md += "- answer: " + std::string(t.final_answer ? to_string(*t.final_answer) : "none") + " (odd one: " +
          to_string(t.odd) + ", " + (t.correct() ? "correct" : "not correct") + ")\n";
    if (!t.failure.empty()) md += "- failure: " + t.failure + "\n";
    for (const auto& rec : t.iterations) {
        md += "\n## Iteration " + std::to_string(rec.index) + "\n\n~~~~\n" + rec.raw_output + "\n~~~~\n\n";
        for (const auto& e : rec.errors) md += "> " + e + "\n";
        if (!rec.errors.empty()) md += "\n";
        for (const auto& g : rec.grids) md += "![" + g.caption() + "](" + grid_file(rec.index, g.target) + ")\n";
    }
    return md;
}

void save_transcript(const SessionTranscript& t, const fs::path& dir) {
    fs::create_directories(dir / "iterations");
    std::ofstream(dir / "transcript.json", std::ios::binary) << transcript_json(t);
    ordered_json timing;
    timing["turn_seconds"] = ordered_json::array();
    for (const auto& rec : t.iterations) timing["turn_seconds"].push_back(rec.seconds);
    std::ofstream(dir / "timing.json", std::ios::binary) << timing.dump(2) << "\n";
    for (const auto& rec : t.iterations)
        for (const auto& g : rec.grids) {
            const auto png = encode_png(g.grid);
            std::ofstream(dir / grid_file(rec.index, g.target), std::ios::binary)
                .write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
        }
    std::ofstream(dir / "transcript.md", std::ios::binary) << format_transcript_markdown(t);
}

}  // namespace imagery

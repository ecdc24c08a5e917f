#include "imagery/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <sstream>
#include <thread>

#include "imagery/error.hpp"
#include "imagery/random.hpp"
#include "imagery/render.hpp"
#include "json.hpp"

namespace imagery {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

int resolve_workers(int requested, std::size_t jobs) {
    int n = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return std::max(1, std::min<int>(n, static_cast<int>(std::max<std::size_t>(jobs, 1))));
}

// Runs job(i) for i in [0, count) on `workers` threads. The first exception
// stops further jobs and is rethrown.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& job) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            {
                std::lock_guard lock(error_mutex);
                if (error) return;
            }
            const std::size_t i = next++;
            if (i >= count) return;
            try {
                job(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

std::optional<SessionStatus> status_from_string(std::string_view s) {
    for (SessionStatus st : {SessionStatus::running, SessionStatus::answered, SessionStatus::budget_vote,
                             SessionStatus::failed})
        if (s == to_string(st)) return st;
    return std::nullopt;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string csv_row(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) line += (i ? "," : "") + csv_field(fields[i]);
    return line + "\n";
}

std::string md_cell(std::string s) {
    std::string out;
    for (char c : s) {
        if (c == '|') out += "\\|";
        else if (c == '\n' || c == '\r') out += ' ';
        else out += c;
    }
    return out;
}

std::string fmt_angle(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

Direction opposite(Direction d) {
    switch (d) {
        case Direction::left: return Direction::right;
        case Direction::right: return Direction::left;
        case Direction::up: return Direction::down;
        case Direction::down: return Direction::up;
        case Direction::cw: return Direction::ccw;
        case Direction::ccw: return Direction::cw;
        case Direction::reset: return Direction::reset;
    }
    return d;
}

}  // namespace

// ---------------------------------------------------------------- config

void RunConfig::validate() const {
    if (n_runs < 1) throw ConfigError("n_runs must be at least 1");
    if (workers < 0) throw ConfigError("workers must not be negative");
    if (agent.empty()) throw ConfigError("agent is required");
    if (agent == "remote" && !remote) throw ConfigError("agent 'remote' needs a remote section");
    (void)loop();
}

LoopConfig RunConfig::loop() const {
    LoopConfig c = loop_config_from_json(overrides, condition_config(condition));
    if (condition == "C1-reset" && !c.reset_enabled) throw ConfigError("C1-reset requires reset_enabled");
    if (condition == "C2-360hint" && !c.hint_360) throw ConfigError("C2-360hint requires hint_360");
    c.validate();
    return c;
}

RunConfig RunConfig::from_json(std::string_view json) {
    ordered_json j;
    try {
        j = ordered_json::parse(json);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("run config: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("run config must be an object");
    RunConfig c;
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "dataset") c.dataset = v.get<std::string>();
            else if (key == "agent") c.agent = v.get<std::string>();
            else if (key == "remote") c.remote = RemoteChatConfig::from_json(v.dump());
            else if (key == "condition") c.condition = v.get<std::string>();
            else if (key == "n_runs") c.n_runs = v.get<int>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "overrides") {
                if (!v.is_object()) throw ConfigError("overrides must be an object");
                c.overrides = v.dump();
            } else if (key == "workers") c.workers = v.get<int>();
            else if (key == "transcripts_dir") c.transcripts_dir = v.get<std::string>();
            else if (key == "note") c.note = v.get<std::string>();
            else throw ConfigError("unknown run config key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("run config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string RunConfig::to_json() const {
    ordered_json j;
    j["dataset"] = dataset.string();
    j["agent"] = agent;
    if (remote) {
        j["remote"] = {{"endpoint", remote->endpoint},
                       {"model", remote->model},
                       {"token_env", remote->token_env},
                       {"timeout_ms", remote->timeout.count()},
                       {"max_attempts", remote->max_attempts},
                       {"backoff_ms", remote->backoff.count()},
                       {"temperature", remote->temperature},
                       {"max_tokens", remote->max_tokens},
                       {"log_file", remote->log_file.string()}};
    }
    j["condition"] = condition;
    j["n_runs"] = n_runs;
    j["seed"] = seed;
    j["overrides"] = ordered_json::parse(overrides);
    j["workers"] = workers;
    j["transcripts_dir"] = transcripts_dir.string();
    j["note"] = note;
    return j.dump(2);
}

// ---------------------------------------------------------------- benchmark

double EvalReport::min_accuracy() const {
    double v = runs.empty() ? 0.0 : 1.0;
    for (const auto& r : runs) v = std::min(v, r.accuracy());
    return v;
}

double EvalReport::max_accuracy() const {
    double v = 0;
    for (const auto& r : runs) v = std::max(v, r.accuracy());
    return v;
}

double EvalReport::mean_accuracy() const {
    if (runs.empty()) return 0;
    double s = 0;
    for (const auto& r : runs) s += r.accuracy();
    return s / static_cast<double>(runs.size());
}

int EvalReport::total_failed() const {
    int n = 0;
    for (const auto& r : runs) n += r.failed;
    return n;
}

AgentFactory agent_factory(const RunConfig& config, const ProblemSet& set) {
    if (config.agent == "remote") {
        if (!config.remote) throw ConfigError("agent 'remote' needs a remote section");
        const RemoteChatConfig remote = *config.remote;
        return [remote](int) -> std::unique_ptr<Agent> { return std::make_unique<RemoteAgent>(remote); };
    }
    (void)make_scripted_agent(config.agent, set, config.seed);  // resolve early
    const std::string name = config.agent;
    const std::uint64_t seed = config.seed;
    return [name, seed, &set](int run) {
        return make_scripted_agent(name, set, Rng::derive(seed, static_cast<std::uint64_t>(run)));
    };
}

EvalReport run_benchmark(const RunConfig& config) {
    config.validate();
    const ProblemSet set = load_problem_set(config.dataset);
    EvalReport r = run_benchmark(config, set, agent_factory(config, set));
    r.dataset = config.dataset.string();
    return r;
}

EvalReport run_benchmark(const RunConfig& config, const ProblemSet& set, const AgentFactory& make_agent) {
    config.validate();
    const LoopConfig loop = config.loop();

    std::vector<std::unique_ptr<Agent>> agents;
    for (int run = 0; run < config.n_runs; ++run) agents.push_back(make_agent(run));

    EvalReport report;
    report.agent = agents.front()->name();
    report.condition = config.condition;
    report.seed = config.seed;
    report.dataset = config.dataset.string();
    report.dataset_checksum = problem_set_checksum(set);
    report.loop_config = loop_config_json(loop);
    report.note = config.note;

    const std::size_t per_run = set.problems.size();
    const std::size_t jobs = per_run * static_cast<std::size_t>(config.n_runs);
    report.outcomes.resize(jobs);

    parallel_for(jobs, resolve_workers(config.workers, jobs), [&](std::size_t i) {
        const int run = static_cast<int>(i / per_run);
        const Problem& p = set.problems[i % per_run];
        Session session(p, loop);
        const SessionTranscript t = run_loop(session, *agents[static_cast<std::size_t>(run)]);

        ProblemOutcome& o = report.outcomes[i];
        o.run = run + 1;
        o.problem_id = p.id;
        o.odd = p.odd;
        o.answer = t.final_answer;
        o.status = t.status;
        o.iterations = static_cast<int>(t.iterations.size());
        o.failure = t.failure;
        if (!config.transcripts_dir.empty()) {
            const fs::path rel = fs::path("run_" + std::to_string(run + 1)) / p.id;
            save_transcript(t, config.transcripts_dir / rel);
            o.transcript = rel.generic_string();
        }
    });

    for (int run = 1; run <= config.n_runs; ++run) {
        RunSummary s;
        s.run = run;
        for (const auto& o : report.outcomes) {
            if (o.run != run) continue;
            ++s.attempted;
            if (!o.scored()) ++s.failed;
            else ++s.scored;
            if (o.correct()) ++s.correct;
        }
        report.runs.push_back(s);
    }
    return report;
}

// ---------------------------------------------------------------- probes

RotationCommand canonical_command(const RotationCommand& c) {
    if (c.direction == Direction::reset || c.angle >= 0) return c;
    return {opposite(c.direction), -c.angle};
}

double ProbeReport::direction_accuracy() const {
    if (rows.empty()) return 0;
    const auto n = std::count_if(rows.begin(), rows.end(), [](const ProbeRow& r) { return r.direction_correct; });
    return double(n) / double(rows.size());
}

std::optional<double> ProbeReport::angle_mae() const {
    double sum = 0;
    int n = 0;
    for (const auto& r : rows)
        if (r.angle_error) {
            sum += *r.angle_error;
            ++n;
        }
    if (!n) return std::nullopt;
    return sum / n;
}

ProbeReport run_probe_eval(ProbeAgent& agent, const std::vector<ProbePair>& pairs, int workers) {
    std::vector<ProbePrediction> preds(pairs.size());
    parallel_for(pairs.size(), resolve_workers(workers, pairs.size()),
                 [&](std::size_t i) { preds[i] = agent.predict(pairs[i]); });

    ProbeReport report;
    report.agent = agent.name();
    report.dataset_checksum = probe_set_checksum(pairs);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        ProbeRow row;
        row.index = i;
        row.truth = canonical_command(pairs[i].applied);
        row.components = preds[i].components;
        row.raw = preds[i].raw;
        const std::string truth_dir = to_string(row.truth.direction);
        std::string pred_dir = "none";
        if (preds[i].command) {
            row.predicted = canonical_command(*preds[i].command);
            pred_dir = to_string(row.predicted->direction);
            row.direction_correct = row.predicted->direction == row.truth.direction;
            if (row.direction_correct) {
                const double d = std::fmod(std::abs(row.predicted->angle - row.truth.angle), 360.0);
                row.angle_error = std::min(d, 360.0 - d);
            }
        } else {
            ++report.unparseable;
        }
        auto& axis = report.per_direction[truth_dir];
        ++axis.items;
        if (row.direction_correct) ++axis.direction_correct;
        ++report.confusion[truth_dir][pred_dir];
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::string probe_set_checksum(const std::vector<ProbePair>& pairs) {
    std::string acc;
    for (const auto& p : pairs) {
        acc += p.ground_truth() + "\n" + to_text(p.object) + "\n";
        acc += sha256_hex(encode_png(p.before)) + sha256_hex(encode_png(p.after)) + "\n";
    }
    return sha256_hex({reinterpret_cast<const std::uint8_t*>(acc.data()), acc.size()});
}

// ---------------------------------------------------------------- euler verification

const char* to_string(EulerVerdict v) noexcept {
    switch (v) {
        case EulerVerdict::match: return "match";
        case EulerVerdict::mirror: return "mirror";
        case EulerVerdict::fail: return "fail";
    }
    return "?";
}

EulerAnglesDeg euler_of(const RotationCommand& c) { return pose_to_euler(Pose{command_quat(c)}); }

EulerCheck verify_euler_prediction(const ProbePair& pair, const EulerAnglesDeg& predicted, double tau,
                                   const CameraRig& rig, RenderSettings settings) {
    settings.width = pair.after.width();
    settings.height = pair.after.height();
    auto diff_for = [&](const EulerAnglesDeg& e) {
        const Pose pose{(pose_from_euler(e).orientation * pair.base_pose.orientation).normalized()};
        return image_diff(render(pair.object, pose, rig, settings), pair.after);
    };
    EulerCheck check;
    check.diff = diff_for(predicted);
    if (check.diff < tau) {
        check.verdict = EulerVerdict::match;
        return check;
    }
    for (int axis = 0; axis < 3; ++axis) {
        EulerAnglesDeg flipped = predicted;
        double& v = axis == 0 ? flipped.pitch : axis == 1 ? flipped.yaw : flipped.roll;
        if (v == 0) continue;
        v = -v;
        if (diff_for(flipped) < tau) {
            check.verdict = EulerVerdict::mirror;
            check.flipped_axis = axis;
            return check;
        }
    }
    return check;
}

// ---------------------------------------------------------------- reports

std::optional<ReportFormat> report_format_from_string(std::string_view s) {
    if (s == "md" || s == "markdown") return ReportFormat::markdown;
    if (s == "csv") return ReportFormat::csv;
    if (s == "json") return ReportFormat::json;
    return std::nullopt;
}

std::string format_percent(double fraction) {
    const double tenths = std::round(fraction * 1000.0);
    char buf[32];
    if (std::fmod(tenths, 10.0) == 0) std::snprintf(buf, sizeof buf, "%.0f", tenths / 10.0);
    else std::snprintf(buf, sizeof buf, "%.1f", tenths / 10.0);
    return buf;
}

std::string format_range(double lo, double hi) {
    const std::string a = format_percent(lo), b = format_percent(hi);
    return a == b ? a : a + "–" + b;
}

namespace {

ordered_json outcome_json(const ProblemOutcome& o) {
    return {{"run", o.run},
            {"problem_id", o.problem_id},
            {"odd", to_string(o.odd)},
            {"answer", o.answer ? ordered_json(to_string(*o.answer)) : ordered_json(nullptr)},
            {"status", to_string(o.status)},
            {"correct", o.correct()},
            {"iterations", o.iterations},
            {"failure", o.failure},
            {"transcript", o.transcript}};
}

std::string eval_markdown(const EvalReport& r) {
    std::ostringstream md;
    md << "# Benchmark report\n\n";
    md << "| Agent | Condition | Runs | Accuracy (%) | Mean (%) | Failed sessions |\n";
    md << "|---|---|---|---|---|---|\n";
    md << "| " << md_cell(r.agent) << " | " << r.condition << " | " << r.runs.size() << " | "
       << format_range(r.min_accuracy(), r.max_accuracy()) << " | " << format_percent(r.mean_accuracy()) << " | "
       << r.total_failed() << " |\n\n";
    md << "- dataset: `" << r.dataset << "`\n";
    md << "- dataset checksum: `" << r.dataset_checksum << "`\n";
    md << "- seed: " << r.seed << "\n";
    md << "- loop config: `" << nlohmann::json::parse(r.loop_config).dump() << "`\n";
    if (!r.note.empty()) md << "- note: " << md_cell(r.note) << "\n";
    md << "\n## Runs\n\n";
    md << "| Run | Attempted | Scored | Correct | Failed | Accuracy (%) | Strict accuracy (%) |\n";
    md << "|---|---|---|---|---|---|---|\n";
    for (const auto& s : r.runs)
        md << "| " << s.run << " | " << s.attempted << " | " << s.scored << " | " << s.correct << " | " << s.failed
           << " | " << format_percent(s.accuracy()) << " | " << format_percent(s.strict_accuracy()) << " |\n";
    md << "\n## Problems\n\n";
    md << "| Run | Problem | Odd | Answer | Status | Iterations | Transcript |\n";
    md << "|---|---|---|---|---|---|---|\n";
    for (const auto& o : r.outcomes)
        md << "| " << o.run << " | " << o.problem_id << " | " << to_string(o.odd) << " | "
           << (o.answer ? to_string(*o.answer) : "-") << " | " << to_string(o.status)
           << (o.scored() ? (o.correct() ? " (correct)" : " (wrong)") : "") << " | " << o.iterations << " | "
           << md_cell(o.transcript) << " |\n";
    return md.str();
}

std::string eval_csv(const EvalReport& r) {
    std::string out = csv_row({"agent", "condition", "seed", "dataset_checksum", "run", "problem_id", "odd",
                               "answer", "status", "correct", "iterations", "failure", "transcript"});
    for (const auto& o : r.outcomes)
        out += csv_row({r.agent, r.condition, std::to_string(r.seed), r.dataset_checksum, std::to_string(o.run),
                        o.problem_id, to_string(o.odd), o.answer ? to_string(*o.answer) : "",
                        to_string(o.status), o.correct() ? "1" : "0", std::to_string(o.iterations), o.failure,
                        o.transcript});
    return out;
}

std::string eval_json(const EvalReport& r) {
    ordered_json j;
    j["format"] = "imagery-eval-report";
    j["agent"] = r.agent;
    j["condition"] = r.condition;
    j["seed"] = r.seed;
    j["dataset"] = r.dataset;
    j["dataset_checksum"] = r.dataset_checksum;
    j["loop_config"] = ordered_json::parse(r.loop_config);
    j["note"] = r.note;
    j["summary"] = {{"min_accuracy", r.min_accuracy()},
                    {"mean_accuracy", r.mean_accuracy()},
                    {"max_accuracy", r.max_accuracy()},
                    {"range", format_range(r.min_accuracy(), r.max_accuracy())},
                    {"failed", r.total_failed()}};
    j["runs"] = ordered_json::array();
    for (const auto& s : r.runs)
        j["runs"].push_back({{"run", s.run},
                             {"attempted", s.attempted},
                             {"scored", s.scored},
                             {"correct", s.correct},
                             {"failed", s.failed},
                             {"accuracy", s.accuracy()},
                             {"strict_accuracy", s.strict_accuracy()}});
    j["outcomes"] = ordered_json::array();
    for (const auto& o : r.outcomes) j["outcomes"].push_back(outcome_json(o));
    return j.dump(2) + "\n";
}

std::string probe_markdown(const ProbeReport& r) {
    std::ostringstream md;
    md << "# Probe report\n\n";
    md << "- agent: " << md_cell(r.agent) << "\n";
    md << "- probe set checksum: `" << r.dataset_checksum << "`\n";
    md << "- items: " << r.rows.size() << ", direction accuracy: " << format_percent(r.direction_accuracy())
       << "%, unparseable: " << r.unparseable << "\n";
    const auto mae = r.angle_mae();
    md << "- angle MAE over direction-correct items: " << (mae ? fmt_angle(*mae) + " deg" : std::string("n/a"))
       << "\n\n";
    md << "| True Direction | Angle | Prediction | Outcome |\n|---|---|---|---|\n";
    for (const auto& row : r.rows) {
        std::string pred = row.predicted ? format_command(*row.predicted) : "(unparseable)";
        if (row.components > 1) pred += " (+" + std::to_string(row.components - 1) + " more)";
        md << "| " << to_string(row.truth.direction) << " | " << fmt_angle(row.truth.angle) << " | " << md_cell(pred)
           << " | " << (row.direction_correct ? "✓" : "✗") << " |\n";
    }
    md << "\n## Direction accuracy\n\n| True Direction | Items | Correct | Accuracy (%) |\n|---|---|---|---|\n";
    for (const auto& [dir, s] : r.per_direction)
        md << "| " << dir << " | " << s.items << " | " << s.direction_correct << " | " << format_percent(s.accuracy())
           << " |\n";
    md << "\n## Confusion (rows: true, columns: predicted)\n\n";
    std::vector<std::string> cols;
    for (const auto& [t, m] : r.confusion)
        for (const auto& [p, n] : m)
            if (std::find(cols.begin(), cols.end(), p) == cols.end()) cols.push_back(p);
    std::sort(cols.begin(), cols.end());
    md << "| |";
    for (const auto& c : cols) md << " " << c << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < cols.size(); ++i) md << "---|";
    md << "\n";
    for (const auto& [t, m] : r.confusion) {
        md << "| " << t << " |";
        for (const auto& c : cols) {
            const auto it = m.find(c);
            md << " " << (it == m.end() ? 0 : it->second) << " |";
        }
        md << "\n";
    }
    return md.str();
}

std::string probe_csv(const ProbeReport& r) {
    std::string out = csv_row({"index", "true_direction", "true_angle", "predicted_direction", "predicted_angle",
                               "components", "direction_correct", "angle_error", "raw"});
    for (const auto& row : r.rows)
        out += csv_row({std::to_string(row.index), to_string(row.truth.direction), fmt_angle(row.truth.angle),
                        row.predicted ? to_string(row.predicted->direction) : "",
                        row.predicted ? fmt_angle(row.predicted->angle) : "", std::to_string(row.components),
                        row.direction_correct ? "1" : "0", row.angle_error ? fmt_angle(*row.angle_error) : "",
                        row.raw});
    return out;
}

std::string probe_json(const ProbeReport& r) {
    ordered_json j;
    j["format"] = "imagery-probe-report";
    j["agent"] = r.agent;
    j["dataset_checksum"] = r.dataset_checksum;
    const auto mae = r.angle_mae();
    j["summary"] = {{"items", r.rows.size()},
                    {"direction_accuracy", r.direction_accuracy()},
                    {"angle_mae", mae ? ordered_json(*mae) : ordered_json(nullptr)},
                    {"unparseable", r.unparseable}};
    j["per_direction"] = ordered_json::object();
    for (const auto& [dir, s] : r.per_direction)
        j["per_direction"][dir] = {{"items", s.items}, {"direction_correct", s.direction_correct}};
    j["confusion"] = r.confusion;
    j["rows"] = ordered_json::array();
    for (const auto& row : r.rows) {
        ordered_json e{{"index", row.index},
                       {"truth", format_command(row.truth)},
                       {"predicted", row.predicted ? ordered_json(format_command(*row.predicted)) : ordered_json(nullptr)},
                       {"components", row.components},
                       {"direction_correct", row.direction_correct},
                       {"angle_error", row.angle_error ? ordered_json(*row.angle_error) : ordered_json(nullptr)},
                       {"raw", row.raw}};
        j["rows"].push_back(std::move(e));
    }
    return j.dump(2) + "\n";
}

}  // namespace

std::string emit_report(const EvalReport& r, ReportFormat f) {
    switch (f) {
        case ReportFormat::markdown: return eval_markdown(r);
        case ReportFormat::csv: return eval_csv(r);
        case ReportFormat::json: return eval_json(r);
    }
    return {};
}

std::string emit_report(const ProbeReport& r, ReportFormat f) {
    switch (f) {
        case ReportFormat::markdown: return probe_markdown(r);
        case ReportFormat::csv: return probe_csv(r);
        case ReportFormat::json: return probe_json(r);
    }
    return {};
}

EvalReport eval_report_from_json(std::string_view json) {
    try {
        const auto j = ordered_json::parse(json);
        if (j.value("format", "") != "imagery-eval-report") throw ConfigError("not an eval report");
        EvalReport r;
        r.agent = j.at("agent").get<std::string>();
        r.condition = j.at("condition").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.dataset = j.at("dataset").get<std::string>();
        r.dataset_checksum = j.at("dataset_checksum").get<std::string>();
        r.loop_config = j.at("loop_config").dump();
        r.note = j.at("note").get<std::string>();
        for (const auto& s : j.at("runs"))
            r.runs.push_back({s.at("run").get<int>(), s.at("attempted").get<int>(), s.at("scored").get<int>(),
                              s.at("correct").get<int>(), s.at("failed").get<int>()});
        for (const auto& e : j.at("outcomes")) {
            ProblemOutcome o;
            o.run = e.at("run").get<int>();
            o.problem_id = e.at("problem_id").get<std::string>();
            o.odd = label_from_string(e.at("odd").get<std::string>()).value();
            if (!e.at("answer").is_null()) o.answer = label_from_string(e.at("answer").get<std::string>()).value();
            o.status = status_from_string(e.at("status").get<std::string>()).value();
            o.iterations = e.at("iterations").get<int>();
            o.failure = e.at("failure").get<std::string>();
            o.transcript = e.at("transcript").get<std::string>();
            r.outcomes.push_back(std::move(o));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("eval report: ") + e.what());
    } catch (const std::bad_optional_access&) {
        throw ConfigError("eval report: bad label or status");
    }
}

ProbeReport probe_report_from_json(std::string_view json) {
    try {
        const auto j = ordered_json::parse(json);
        if (j.value("format", "") != "imagery-probe-report") throw ConfigError("not a probe report");
        ProbeReport r;
        r.agent = j.at("agent").get<std::string>();
        r.dataset_checksum = j.at("dataset_checksum").get<std::string>();
        r.unparseable = j.at("summary").at("unparseable").get<int>();
        for (const auto& [dir, s] : j.at("per_direction").items())
            r.per_direction[dir] = {s.at("items").get<int>(), s.at("direction_correct").get<int>()};
        r.confusion = j.at("confusion").get<std::map<std::string, std::map<std::string, int>>>();
        for (const auto& e : j.at("rows")) {
            ProbeRow row;
            row.index = e.at("index").get<std::size_t>();
            row.truth = parse_command(e.at("truth").get<std::string>());
            if (!e.at("predicted").is_null()) row.predicted = parse_command(e.at("predicted").get<std::string>());
            row.components = e.at("components").get<std::size_t>();
            row.direction_correct = e.at("direction_correct").get<bool>();
            if (!e.at("angle_error").is_null()) row.angle_error = e.at("angle_error").get<double>();
            row.raw = e.at("raw").get<std::string>();
            r.rows.push_back(std::move(row));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("probe report: ") + e.what());
    } catch (const ParseError& e) {
        throw ConfigError(std::string("probe report: ") + e.what());
    }
}

}  // namespace imagery

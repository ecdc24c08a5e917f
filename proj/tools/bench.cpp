#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "imagery/agents.hpp"
#include "imagery/error.hpp"
#include "imagery/eval.hpp"
#include "imagery/studio.hpp"
#include "json.hpp"

using namespace imagery;
namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
    if (p.empty() || p == "-") {
        std::cout << text;
        return;
    }
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << text;
}

ReportFormat parse_format(const std::string& s) {
    const auto f = report_format_from_string(s);
    if (!f) throw ConfigError("unknown format '" + s + "' (md, csv, json)");
    return *f;
}

// Sweep pairs for the originals of the first `objects` problems.
std::vector<ProbePair> sweep_pairs(const ProblemSet& set, std::size_t objects, const SweepSpec& spec,
                                   const RenderSettings& settings) {
    std::vector<ProbePair> pairs;
    for (std::size_t i = 0; i < std::min(objects, set.problems.size()); ++i) {
        const auto& p = set.problems[i];
        auto part = make_sweep_dataset(p.original, p.pose(ObjectLabel::original), spec, {}, settings);
        pairs.insert(pairs.end(), part.begin(), part.end());
    }
    return pairs;
}

std::vector<EulerAnglesDeg> read_predictions(const fs::path& file) {
    const auto j = nlohmann::json::parse(read_text(file));
    const auto& list = j.is_object() ? j.at("predictions") : j;
    std::vector<EulerAnglesDeg> out;
    for (const auto& e : list) {
        if (e.is_array()) out.push_back({e.at(0).get<double>(), e.at(1).get<double>(), e.at(2).get<double>()});
        else out.push_back({e.value("pitch", 0.0), e.value("yaw", 0.0), e.value("roll", 0.0)});
    }
    return out;
}

StudioService* g_service = nullptr;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Imagery benchmark tools"};
    app.require_subcommand(1);

    // forge
    auto* forge = app.add_subcommand("forge", "Generate and save a problem set");
    std::uint64_t forge_seed = 2026;
    std::size_t forge_count = 40;
    fs::path forge_out = "data/generated_set";
    int forge_size = 256;
    forge->add_option("--seed", forge_seed, "Generation seed");
    forge->add_option("--count", forge_count, "Number of problems");
    forge->add_option("--out", forge_out, "Output directory");
    forge->add_option("--size", forge_size, "Image size in pixels");

    // run
    auto* run = app.add_subcommand("run", "Run a benchmark configuration");
    fs::path run_config;
    fs::path run_out;
    std::string run_format = "md";
    run->add_option("--config", run_config, "Run configuration (JSON)")->required();
    run->add_option("--out", run_out, "Report file; the JSON report is written alongside");
    run->add_option("--format", run_format, "md, csv or json");

    // probes
    auto* probes = app.add_subcommand("probes", "Score a probe agent on rotation pairs");
    std::string probe_agent = "ground_truth";
    fs::path probe_remote;
    fs::path probe_pairs;
    fs::path probe_dataset = "data/default_set";
    std::size_t probe_objects = 3;
    std::string probe_format = "md";
    fs::path probe_out;
    probes->add_option("--agent", probe_agent, "ground_truth or remote");
    probes->add_option("--remote-config", probe_remote, "Remote chat config (JSON) for --agent remote");
    probes->add_option("--pairs", probe_pairs, "Saved probe pairs; default is a sweep of --dataset");
    probes->add_option("--dataset", probe_dataset, "Problem set for the default sweep");
    probes->add_option("--objects", probe_objects, "Objects in the default sweep");
    probes->add_option("--format", probe_format, "md, csv or json");
    probes->add_option("--out", probe_out, "Report file");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Write a rotation sweep probe set");
    fs::path sweep_dataset = "data/default_set";
    fs::path sweep_out = "data/sweep";
    std::size_t sweep_objects = 3;
    double sweep_step = 30;
    int sweep_size = 256;
    sweep->add_option("--dataset", sweep_dataset, "Problem set whose originals are swept");
    sweep->add_option("--out", sweep_out, "Output directory");
    sweep->add_option("--objects", sweep_objects, "Number of objects");
    sweep->add_option("--step", sweep_step, "Angle step in degrees");
    sweep->add_option("--size", sweep_size, "Image size in pixels");

    // verify-euler
    auto* verify = app.add_subcommand("verify-euler", "Re-render Euler predictions against probe pairs");
    fs::path verify_pairs;
    fs::path verify_preds;
    double verify_tau = 0.01;
    verify->add_option("--pairs", verify_pairs, "Probe pair directory")->required();
    verify->add_option("--preds", verify_preds,
                       "Predictions: JSON list of [pitch, yaw, roll] or {pitch, yaw, roll}, or 'truth'")
        ->required();
    verify->add_option("--tau", verify_tau, "Match threshold on image diff");

    // report
    auto* report = app.add_subcommand("report", "Re-emit a saved JSON report");
    fs::path report_in;
    std::string report_format = "md";
    report->add_option("--in", report_in, "Report JSON")->required();
    report->add_option("--format", report_format, "md, csv or json");

    // serve
    auto* serve = app.add_subcommand("serve", "Start the studio service");
    StudioConfig studio;
    studio.dataset = "data/default_set";
    serve->add_option("--dataset", studio.dataset, "Problem set directory");
    serve->add_option("--state", studio.state_dir, "Directory for answers and transcript bundles");
    serve->add_option("--host", studio.host, "Bind address");
    serve->add_option("--port", studio.port, "Port");
    serve->add_flag("--read-only", studio.read_only, "Disable calibration writes");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*forge) {
            RenderSettings settings;
            settings.width = settings.height = forge_size;
            const ProblemSet set = make_problem_set(forge_seed, forge_count);
            save_problem_set(set, forge_out, {}, settings);
            int audited = 0;
            for (const auto& p : set.problems) audited += audit_problem(p);
            std::cout << "wrote " << set.problems.size() << " problems to " << forge_out.string() << " (" << audited
                      << " pass the audit), checksum " << problem_set_checksum(set) << "\n";
        } else if (*run) {
            if (!run_out.empty()) {
                fs::path json_path = run_out;
                json_path.replace_extension(".json");
                for (const auto& p : {run_out, json_path})
                    if (fs::weakly_canonical(p) == fs::weakly_canonical(run_config))
                        throw ConfigError("report " + p.string() + " would overwrite the config");
            }
            RunConfig config = RunConfig::from_json(read_text(run_config));
            if (config.dataset.is_relative()) config.dataset = run_config.parent_path() / config.dataset;
            const EvalReport r = run_benchmark(config);
            const std::string text = emit_report(r, parse_format(run_format));
            if (run_out.empty()) {
                std::cout << text;
            } else {
                write_text(run_out, text);
                fs::path json_path = run_out;
                json_path.replace_extension(".json");
                if (json_path != run_out) write_text(json_path, emit_report(r, ReportFormat::json));
                std::cout << "accuracy " << format_range(r.min_accuracy(), r.max_accuracy()) << "% over "
                          << r.runs.size() << " run(s), " << r.total_failed() << " failed session(s)\n";
            }
        } else if (*probes) {
            std::vector<ProbePair> pairs;
            if (!probe_pairs.empty()) pairs = load_probe_pairs(probe_pairs);
            else pairs = sweep_pairs(load_problem_set(probe_dataset), probe_objects, {}, {});
            std::unique_ptr<RemoteAgent> backend;
            std::unique_ptr<ProbeAgent> agent;
            if (probe_agent == "ground_truth") {
                agent = std::make_unique<GroundTruthProbeAgent>();
            } else if (probe_agent == "remote") {
                if (probe_remote.empty()) throw ConfigError("--agent remote needs --remote-config");
                auto rc = RemoteChatConfig::from_json(read_text(probe_remote));
                backend = std::make_unique<RemoteAgent>(rc);
                agent = std::make_unique<ChatProbeAgent>(*backend, "remote:" + rc.model);
            } else {
                throw ConfigError("unknown probe agent '" + probe_agent + "'");
            }
            const ProbeReport r = run_probe_eval(*agent, pairs, probe_agent == "remote" ? 4 : 0);
            write_text(probe_out, emit_report(r, parse_format(probe_format)));
        } else if (*sweep) {
            SweepSpec spec;
            spec.step_deg = sweep_step;
            spec.validate();
            RenderSettings settings;
            settings.width = settings.height = sweep_size;
            const auto pairs = sweep_pairs(load_problem_set(sweep_dataset), sweep_objects, spec, settings);
            save_probe_pairs(pairs, sweep_out);
            std::cout << "wrote " << pairs.size() << " pairs to " << sweep_out.string() << "\n";
        } else if (*verify) {
            const auto pairs = load_probe_pairs(verify_pairs);
            std::vector<EulerAnglesDeg> preds;
            if (verify_preds == "truth") {
                for (const auto& p : pairs) preds.push_back(euler_of(p.applied));
            } else {
                preds = read_predictions(verify_preds);
            }
            if (preds.size() != pairs.size())
                throw ConfigError("expected " + std::to_string(pairs.size()) + " predictions, got " +
                                  std::to_string(preds.size()));
            std::map<std::string, int> counts;
            std::cout << "index,truth,pitch,yaw,roll,verdict,diff\n";
            for (std::size_t i = 0; i < pairs.size(); ++i) {
                const auto c = verify_euler_prediction(pairs[i], preds[i], verify_tau);
                ++counts[to_string(c.verdict)];
                std::cout << i << "," << pairs[i].ground_truth() << "," << preds[i].pitch << "," << preds[i].yaw
                          << "," << preds[i].roll << "," << to_string(c.verdict) << "," << c.diff << "\n";
            }
            std::cerr << "match " << counts["match"] << ", mirror " << counts["mirror"] << ", fail " << counts["fail"]
                      << " of " << pairs.size() << "\n";
        } else if (*report) {
            const std::string text = read_text(report_in);
            const auto j = nlohmann::json::parse(text);
            const auto fmt = parse_format(report_format);
            if (j.value("format", "") == "imagery-probe-report") std::cout << emit_report(probe_report_from_json(text), fmt);
            else std::cout << emit_report(eval_report_from_json(text), fmt);
        } else if (*serve) {
            StudioService service(studio);
            g_service = &service;
            std::signal(SIGINT, [](int) {
                if (g_service) g_service->stop();
            });
            std::cerr << "serving " << studio.dataset.string() << " on http://" << studio.host << ":" << studio.port
                      << "/v1/problems\n";
            service.listen();
            g_service = nullptr;
        }
    } catch (const LoadError& e) {
        std::cerr << "error: " << e.file() << ": " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

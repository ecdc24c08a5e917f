#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "imagery/agents.hpp"
#include "imagery/forge.hpp"
#include "imagery/session.hpp"

namespace imagery {

struct RunConfig {
    std::filesystem::path dataset;  // problem-set directory
    /// Scripted agent name or "remote" (then `remote` must be set).
    std::string agent = "voxel_oracle";
    std::optional<RemoteChatConfig> remote;
    std::string condition = "C3-incremental";
    int n_runs = 1;
    std::uint64_t seed = 0;
    /// Partial LoopConfig JSON applied on top of the condition.
    std::string overrides = "{}";
    /// 0 picks the hardware concurrency.
    int workers = 0;
    /// Where per-session transcript bundles go; empty skips them.
    std::filesystem::path transcripts_dir;
    std::string note;

    void validate() const;  // ConfigError
    /// Condition flags plus overrides. Overrides may not contradict the
    /// condition (C1 keeps reset, C2 keeps the 360 hint).
    LoopConfig loop() const;

    static RunConfig from_json(std::string_view json);  // ConfigError
    std::string to_json() const;
};

struct ProblemOutcome {
    int run = 0;
    std::string problem_id;
    ObjectLabel odd = ObjectLabel::A;
    std::optional<ObjectLabel> answer;
    SessionStatus status = SessionStatus::running;
    int iterations = 0;
    std::string failure;
    std::string transcript;  // path relative to transcripts_dir, or empty

    bool scored() const { return status != SessionStatus::failed; }
    bool correct() const { return answer && *answer == odd; }
};

struct RunSummary {
    int run = 0;
    int attempted = 0;
    int scored = 0;  // attempted minus failed
    int correct = 0;
    int failed = 0;
    /// correct / scored; 0 when nothing was scored.
    double accuracy() const { return scored ? double(correct) / scored : 0.0; }
    /// correct / attempted.
    double strict_accuracy() const { return attempted ? double(correct) / attempted : 0.0; }
};

struct EvalReport {
    std::string agent;
    std::string condition;
    std::uint64_t seed = 0;
    std::string dataset;
    std::string dataset_checksum;
    std::string loop_config;  // loop_config_json
    std::string note;
    std::vector<RunSummary> runs;
    std::vector<ProblemOutcome> outcomes;  // run-major, dataset order

    double min_accuracy() const;
    double mean_accuracy() const;
    double max_accuracy() const;
    int total_failed() const;
};

/// Builds a fresh agent for run `run`.
using AgentFactory = std::function<std::unique_ptr<Agent>(int run)>;

/// Resolves config.dataset and config.agent, then runs.
EvalReport run_benchmark(const RunConfig& config);
/// n_runs passes over `set`; sessions fan out over a bounded pool.
EvalReport run_benchmark(const RunConfig& config, const ProblemSet& set, const AgentFactory& make_agent);

/// Scripted agents by name, or the remote client.
AgentFactory agent_factory(const RunConfig& config, const ProblemSet& set);

struct ProbeRow {
    std::size_t index = 0;
    RotationCommand truth;
    std::optional<RotationCommand> predicted;
    std::size_t components = 0;
    bool direction_correct = false;
    std::optional<double> angle_error;  // direction-correct rows only
    std::string raw;
};

struct ProbeAxisStats {
    int items = 0;
    int direction_correct = 0;
    double accuracy() const { return items ? double(direction_correct) / items : 0.0; }
};

struct ProbeReport {
    std::string agent;
    std::string dataset_checksum;
    std::vector<ProbeRow> rows;
    std::map<std::string, ProbeAxisStats> per_direction;  // keyed by true direction
    /// truth direction -> predicted direction ("none" when unparseable) -> count
    std::map<std::string, std::map<std::string, int>> confusion;
    int unparseable = 0;

    double direction_accuracy() const;
    std::optional<double> angle_mae() const;
};

/// Negative angles flip the direction ("left:-30" is "right:30").
RotationCommand canonical_command(const RotationCommand& c);

/// One prediction per pair.
ProbeReport run_probe_eval(ProbeAgent& agent, const std::vector<ProbePair>& pairs, int workers = 1);

std::string probe_set_checksum(const std::vector<ProbePair>& pairs);

enum class EulerVerdict { match, mirror, fail };
const char* to_string(EulerVerdict v) noexcept;

struct EulerCheck {
    EulerVerdict verdict = EulerVerdict::fail;
    double diff = 1;                // diff of the prediction as given
    std::optional<int> flipped_axis;  // 0 pitch, 1 yaw, 2 roll; set for mirror
};

/// The Euler angles of a single camera command.
EulerAnglesDeg euler_of(const RotationCommand& c);

/// Renders base_pose rotated by `predicted` and compares with pair.after.
/// Below `tau` is a match; otherwise a single-axis sign flip below `tau`
/// is a mirror; otherwise fail. Image size follows pair.after.
EulerCheck verify_euler_prediction(const ProbePair& pair, const EulerAnglesDeg& predicted, double tau = 0.01,
                                   const CameraRig& rig = {}, RenderSettings settings = {});

enum class ReportFormat { markdown, csv, json };
std::optional<ReportFormat> report_format_from_string(std::string_view s);

/// Percent with at most one decimal, e.g. "62.5" or "55".
std::string format_percent(double fraction);
/// "55–62.5" for a spread, a single value otherwise.
std::string format_range(double lo, double hi);

std::string emit_report(const EvalReport& r, ReportFormat f);
std::string emit_report(const ProbeReport& r, ReportFormat f);

/// Reads what emit_report(..., json) wrote.
EvalReport eval_report_from_json(std::string_view json);
ProbeReport probe_report_from_json(std::string_view json);

}  // namespace imagery

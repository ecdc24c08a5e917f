#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "imagery/forge.hpp"
#include "imagery/protocol.hpp"
#include "imagery/render.hpp"

namespace imagery {

struct LoopConfig {
    int min_iterations = 5;
    int max_iterations = 15;
    bool reset_enabled = false;
    bool hint_360 = false;
    bool allow_original_target = false;
    PromptVariant prompt_variant = PromptVariant::incremental;
    PromptOptions prompt_options;
    std::size_t max_sequences = 8;
    std::size_t max_steps_per_sequence = 128;
    CameraRig rig;
    RenderSettings settings;

    void validate() const;  // ConfigError
};

/// "C1-reset", "C2-360hint" or "C3-incremental". Throws ConfigError.
LoopConfig condition_config(std::string_view name);

/// JSON object with every LoopConfig field. Reading accepts a subset and
/// keeps defaults for missing keys; unknown keys are a ConfigError.
std::string loop_config_json(const LoopConfig& c);
LoopConfig loop_config_from_json(std::string_view json, LoopConfig base = {});

struct ObjectState {
    ObjectLabel label = ObjectLabel::original;
    Polycube polycube{{VoxelCoord{}}};
    Pose initial_pose;
    Pose current_pose;
    std::vector<std::pair<RotationCommand, Pose>> history;
};

struct SnapshotGrid {
    ObjectLabel target = ObjectLabel::original;
    /// Executed steps in order; empty for a zero-rotation fill snapshot.
    std::vector<RotationCommand> steps;
    RasterImage grid{1, 1};

    std::string caption() const;
};

struct IterationRecord {
    int index = 0;
    std::string raw_output;
    std::optional<TurnOutput> turn;  // absent when the reply was unusable
    std::vector<CommandSequence> executed;
    std::vector<SnapshotGrid> grids;  // original, A, B, C order
    std::vector<std::string> errors;
    double seconds = 0;  // agent latency; not part of the transcript bytes
};

enum class SessionStatus { running, answered, budget_vote, failed };

const char* to_string(SessionStatus s) noexcept;

struct SessionTranscript {
    std::string problem_id;
    LoopConfig config;
    std::string agent;
    std::vector<IterationRecord> iterations;
    SessionStatus status = SessionStatus::running;
    std::optional<ObjectLabel> final_answer;
    ObjectLabel odd = ObjectLabel::A;
    std::string failure;

    bool correct() const { return final_answer && *final_answer == odd; }
};

/// One problem being worked on. Not thread-safe; distinct sessions are
/// independent.
class Session {
public:
    Session(Problem problem, LoopConfig config);

    const Problem& problem() const noexcept { return problem_; }
    const LoopConfig& config() const noexcept { return config_; }
    /// Completed iterations.
    int iteration() const noexcept { return static_cast<int>(transcript_.iterations.size()); }
    bool finished() const noexcept { return transcript_.status != SessionStatus::running; }
    const ObjectState& object(ObjectLabel l) const { return objects_[static_cast<std::size_t>(l)]; }
    const SessionTranscript& transcript() const noexcept { return transcript_; }

    RasterImage snapshot(ObjectLabel l) const;

    /// Applies a parsed turn as the next iteration. Throws
    /// IterationMismatchError unless turn.iteration_number is the next one.
    const IterationRecord& execute_turn(const TurnOutput& turn, std::string raw_output = {});

    /// Parses and applies a raw agent reply. Unusable replies still count
    /// as an iteration (with fill snapshots and the error echoed back).
    /// A wrong iteration_number is noted and corrected unless `strict`.
    const IterationRecord& submit(const std::string& raw, bool strict = false);

    /// Applies one command to one object outside the turn structure and
    /// returns the new snapshot (interactive use).
    RasterImage apply(ObjectLabel l, const RotationCommand& cmd);

    TurnContext build_context() const;

    /// Marks the session failed (e.g. transport error). Idempotent.
    void fail(const std::string& why);

    void set_agent_name(std::string name) { transcript_.agent = std::move(name); }
    void set_last_seconds(double s);

private:
    SnapshotGrid run_steps(ObjectLabel l, const std::vector<RotationCommand>& steps);
    void conclude_if_due(IterationRecord& rec);

    Problem problem_;
    LoopConfig config_;
    std::array<ObjectState, 4> objects_;
    SessionTranscript transcript_;
    std::optional<Memory> last_memory_;
    RasterImage problem_image_{1, 1};
};

class Agent {
public:
    virtual ~Agent() = default;
    virtual std::string name() const = 0;
    /// One reply for the given context. May throw TransportError or
    /// MalformedReplyError. Must tolerate concurrent calls for different
    /// sessions.
    virtual std::string respond(const TurnContext& ctx) = 0;
};

SessionTranscript run_loop(Session& session, Agent& agent);

/// Replays the executed commands of a transcript from the calibrated poses.
std::array<Pose, 4> replay_poses(const Problem& problem, const SessionTranscript& transcript);

/// Deterministic JSON (no timings).
std::string transcript_json(const SessionTranscript& t);
/// Reads back what transcript_json wrote. Grid images are left as 1x1
/// placeholders; the PNGs stay on disk.
SessionTranscript transcript_from_json(std::string_view json);
/// Writes transcript.json, timing.json, iterations/NN_<label>.png and
/// transcript.md.
void save_transcript(const SessionTranscript& t, const std::filesystem::path& dir);
/// Chat-style thread: each iteration's reply followed by its grids.
std::string format_transcript_markdown(const SessionTranscript& t);

}  // namespace imagery

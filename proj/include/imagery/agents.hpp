#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "imagery/forge.hpp"
#include "imagery/session.hpp"

namespace imagery {

/// Sends a chat and returns the reply text.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

struct RemoteChatConfig {
    std::string endpoint = "http://127.0.0.1:8000/v1/chat/completions";
    std::string model;
    /// Name of the environment variable holding the bearer token. Empty
    /// means no Authorization header.
    std::string token_env = "IMAGERY_API_KEY";
    std::chrono::milliseconds timeout{120000};
    int max_attempts = 3;
    std::chrono::milliseconds backoff{1000};  // doubled after each failure
    double temperature = 0.0;
    int max_tokens = 4096;
    /// Request/response log (JSON lines). Empty disables logging.
    std::filesystem::path log_file;

    static RemoteChatConfig from_json(std::string_view json);  // ConfigError
};

/// Chat-completions client with base64 PNG attachments.
class RemoteAgent : public Agent, public ChatBackend {
public:
    explicit RemoteAgent(RemoteChatConfig config);

    std::string name() const override { return "remote:" + config_.model; }
    /// Sends the turn; on an unparseable reply asks once more with the
    /// parse error attached, then throws MalformedReplyError.
    std::string respond(const TurnContext& ctx) override;
    /// One request with retries. 401/403 throw ConfigError; other failures
    /// throw TransportError once attempts are used up.
    std::string complete(const std::vector<ChatMessage>& messages) override;

    /// The JSON request body for `messages`.
    std::string request_body(const std::vector<ChatMessage>& messages) const;

private:
    void log(const std::string& kind, const std::string& body);

    RemoteChatConfig config_;
    std::string scheme_host_;
    std::string path_;
    std::mutex log_mutex_;
};

/// Knows the answer from the dataset and only issues zero-rotation
/// snapshots until it may answer.
class VoxelOracleAgent : public Agent {
public:
    explicit VoxelOracleAgent(std::vector<Problem> problems);
    std::string name() const override { return "voxel_oracle"; }
    std::string respond(const TurnContext& ctx) override;

private:
    std::map<std::string, Problem> problems_;
};

struct ResetMatchConfig {
    /// Oblique offset applied after reset before every snapshot.
    double view_yaw_deg = 30;
    double view_pitch_deg = 25;
    /// Frames closer than this count as identical.
    double match_threshold = 1e-3;
};

/// Resets every option and photographs it in all 24 grid orientations
/// from a fixed oblique offset. Two options match when their photo sets
/// coincide; the option matching neither other option is the answer. If
/// the original may be rotated it is walked too and used as the reference.
class ResetMatchAgent : public Agent {
public:
    explicit ResetMatchAgent(ResetMatchConfig config = {}) : config_(config) {}
    std::string name() const override { return "reset_match"; }
    std::string respond(const TurnContext& ctx) override;

    /// The command walk issued per object and the indices of its frames.
    std::vector<RotationCommand> walk() const;
    std::vector<std::size_t> frame_indices() const;

private:
    ResetMatchConfig config_;
};

struct OrbitSearchConfig {
    /// Downward tilt of the views the dataset uses; undone before sweeping.
    double tilt_deg = 30;
    double step_deg = 30;
    /// Best-frame diff above which an option is considered unmatched.
    /// On a held-out 40-problem set (seed 999) matching options scored 0
    /// and odd ones at least 0.068.
    double threshold = 0.01;
};

/// Sweeps each option through full turns about the vertical axis, upright
/// and flipped, and compares every frame with the original's snapshot.
/// The option whose best frame is worst is the answer.
class OrbitSearchAgent : public Agent {
public:
    explicit OrbitSearchAgent(OrbitSearchConfig config = {});
    std::string name() const override { return "orbit_search"; }
    std::string respond(const TurnContext& ctx) override;

    std::vector<RotationCommand> sweep() const;
    std::vector<std::size_t> frame_indices() const;

private:
    OrbitSearchConfig config_;
};

/// Guesses uniformly per (seed, problem) and answers at the minimum
/// iteration. Chance baseline for multi-run reports.
class RandomGuessAgent : public Agent {
public:
    explicit RandomGuessAgent(std::uint64_t seed) : seed_(seed) {}
    std::string name() const override { return "random_guess"; }
    std::string respond(const TurnContext& ctx) override;

private:
    std::uint64_t seed_;
};

/// Returns scripted replies in order; the last one repeats.
class ReplayAgent : public Agent {
public:
    explicit ReplayAgent(std::vector<std::string> replies, std::string name = "replay")
        : replies_(std::move(replies)), name_(std::move(name)) {}
    std::string name() const override { return name_; }
    std::string respond(const TurnContext& ctx) override;

private:
    std::vector<std::string> replies_;
    std::string name_;
};

/// Builds a named scripted agent: voxel_oracle, reset_match, orbit_search,
/// random_guess. Throws ConfigError for unknown names.
std::unique_ptr<Agent> make_scripted_agent(std::string_view name, const ProblemSet& set, std::uint64_t seed = 0);

struct ProbePrediction {
    std::optional<RotationCommand> command;  // first component of the reply
    std::size_t components = 0;
    std::string raw;
};

/// Accepts "right:90", "rotate:ccw:35,left:45,up:20", "Left 30 degrees",
/// "clockwise: 15°" and similar; only the first component is kept.
ProbePrediction parse_probe_reply(std::string_view raw);

std::vector<ChatMessage> probe_messages(const ProbePair& pair);

class ProbeAgent {
public:
    virtual ~ProbeAgent() = default;
    virtual std::string name() const = 0;
    virtual ProbePrediction predict(const ProbePair& pair) = 0;
};

/// Wraps a chat backend with the probe prompt.
class ChatProbeAgent : public ProbeAgent {
public:
    ChatProbeAgent(ChatBackend& backend, std::string name) : backend_(backend), name_(std::move(name)) {}
    std::string name() const override { return name_; }
    ProbePrediction predict(const ProbePair& pair) override;

private:
    ChatBackend& backend_;
    std::string name_;
};

/// Answers with the ground truth.
class GroundTruthProbeAgent : public ProbeAgent {
public:
    std::string name() const override { return "ground_truth"; }
    ProbePrediction predict(const ProbePair& pair) override { return parse_probe_reply(pair.ground_truth()); }
};

}  // namespace imagery

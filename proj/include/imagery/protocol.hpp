#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "imagery/command.hpp"
#include "imagery/image.hpp"

namespace imagery {

enum class ObjectLabel { original, A, B, C };

inline constexpr std::array<ObjectLabel, 3> kOptionLabels{ObjectLabel::A, ObjectLabel::B, ObjectLabel::C};
inline constexpr std::array<ObjectLabel, 4> kAllLabels{ObjectLabel::original, ObjectLabel::A, ObjectLabel::B,
                                                       ObjectLabel::C};

const char* to_string(ObjectLabel label) noexcept;
std::optional<ObjectLabel> label_from_string(std::string_view s);
/// 0, 1, 2 for A, B, C. Undefined for original.
inline std::size_t option_index(ObjectLabel l) { return static_cast<std::size_t>(l) - 1; }

enum class Conclusion { unknown, probably_not_the_answer, probably_the_odd_one };

const char* to_string(Conclusion c) noexcept;

struct Memory {
    std::string rationale;
    std::array<Conclusion, 3> partial_conclusion{};  // A, B, C

    bool operator==(const Memory&) const = default;
};

struct CommandSequence {
    ObjectLabel target = ObjectLabel::A;
    std::vector<RotationCommand> steps;

    bool operator==(const CommandSequence&) const = default;
};

/// A command entry that could not be used; kept so the error can be echoed
/// back to the agent.
struct RejectedSequence {
    std::size_t index = 0;
    std::string target;
    std::string rotation_sequence;
    std::string reason;

    bool operator==(const RejectedSequence&) const = default;
};

struct TurnOutput {
    Memory memory;
    int iteration_number = 1;
    std::vector<CommandSequence> commands;
    std::optional<ObjectLabel> final_answer;
    std::vector<RejectedSequence> rejected;

    bool operator==(const TurnOutput&) const = default;
};

enum class CommandPolicy {
    /// Bad command sequences are moved to `rejected`; the turn survives.
    lenient,
    /// The first bad sequence throws its ParseError.
    strict,
};

/// Extracts the first fenced ```json block (or the first balanced top-level
/// object) and validates it. Throws NoJsonError, SchemaError, or (strict
/// policy) ParseError. Unknown keys are ignored.
TurnOutput parse_turn_output(std::string_view raw, CommandPolicy policy = CommandPolicy::lenient);

/// Fenced JSON in the agent format; parse_turn_output inverts it.
std::string serialize_turn_output(const TurnOutput& turn);

/// Benchmark question shown with every problem image.
inline constexpr std::string_view kProblemStatement =
    "The left image shows the original cube stack made of equal-sized small cubes. Which of the options on "
    "the right cannot be obtained by rotating the original cube stack? Please answer from options A, B or C.";

/// Optional prompt strategies layered on top of the base instructions.
struct PromptOptions {
    bool require_min_iterations = true;
    bool prefer_geometric_match = false;
    bool step_by_step = false;
    bool track_candidates = false;
    bool estimate_distance = false;
};

enum class PromptVariant { incremental, reset, sweep360 };

const char* to_string(PromptVariant v) noexcept;
std::optional<PromptVariant> prompt_variant_from_string(std::string_view s);

/// System instructions describing the loop, the command grammar and the
/// JSON reply format.
std::string build_instructions(PromptVariant variant, const PromptOptions& options, int min_iterations,
                               bool reset_enabled, bool allow_original_target);

std::string serialize_problem_statement(std::string_view statement);

struct LabeledGrid {
    ObjectLabel target;
    std::string caption;  // e.g. "A: right:15,right:15,up:10"
    RasterImage image;
};

/// Everything an agent sees on one turn.
struct TurnContext {
    std::string problem_id;
    int iteration_number = 1;  // the iteration the agent must produce
    int min_iterations = 1;
    bool reset_enabled = false;
    bool allow_original_target = false;

    std::string instructions;
    std::string statement;
    RasterImage problem_image{1, 1};
    std::vector<std::string> previous_outputs;  // verbatim, oldest first
    std::string feedback;                       // imagery-module notes on the last iteration
    std::vector<LabeledGrid> last_grids;        // previous iteration only
    RasterImage original_snapshot{1, 1};
};

struct ContentPart {
    enum class Kind { text, image } kind = Kind::text;
    std::string text;                 // text, or caption for images
    std::vector<std::uint8_t> png;    // image bytes

    bool operator==(const ContentPart&) const = default;
};

struct ChatMessage {
    std::string role;  // system | user | assistant
    std::vector<ContentPart> parts;

    bool operator==(const ChatMessage&) const = default;
};

/// Fixed order: instructions; statement + problem image; each previous
/// output as an assistant message; then a user message with the feedback,
/// the last iteration's grids and the original's current snapshot.
std::vector<ChatMessage> serialize_turn_context(const TurnContext& ctx);

}  // namespace imagery

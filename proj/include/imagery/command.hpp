#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace imagery {

enum class Direction { left, right, up, down, cw, ccw, reset };

const char* to_string(Direction d) noexcept;

/// One camera-space rotation. `angle` is in degrees and ignored for reset.
struct RotationCommand {
    Direction direction = Direction::left;
    double angle = 0.0;

    static RotationCommand reset() { return {Direction::reset, 0.0}; }

    /// The command that undoes this one (reset has no inverse and maps to itself).
    RotationCommand inverse() const;

    bool operator==(const RotationCommand&) const = default;
};

/// Parses one token of the grammar
///   left:V | right:V | up:V | down:V | rotate:cw:V | rotate:ccw:V | reset
/// Keywords are case-insensitive and surrounding whitespace is ignored.
/// Throws ParseError naming the offending token.
RotationCommand parse_command(std::string_view text);

/// Splits on commas and parses every token; the first bad token fails the
/// whole sequence and its index is reported.
std::vector<RotationCommand> parse_sequence(std::string_view text);

/// Surface form, e.g. "left:30", "rotate:ccw:12.5", "reset". Angles use the
/// shortest representation that parses back to the same double.
std::string format_command(const RotationCommand& cmd);
std::string format_sequence(const std::vector<RotationCommand>& cmds);

}  // namespace imagery

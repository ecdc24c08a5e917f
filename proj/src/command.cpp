#include "imagery/command.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>

#include "imagery/error.hpp"

namespace imagery {

const char* to_string(Direction d) noexcept {
    switch (d) {
        case Direction::left: return "left";
        case Direction::right: return "right";
        case Direction::up: return "up";
        case Direction::down: return "down";
        case Direction::cw: return "cw";
        case Direction::ccw: return "ccw";
        case Direction::reset: return "reset";
    }
    return "?";
}

const char* to_string(ParseErrorKind kind) noexcept {
    switch (kind) {
        case ParseErrorKind::empty: return "empty";
        case ParseErrorKind::unknown_keyword: return "unknown-keyword";
        case ParseErrorKind::missing_prefix: return "missing-prefix";
        case ParseErrorKind::missing_angle: return "missing-angle";
        case ParseErrorKind::bad_angle: return "bad-angle";
        case ParseErrorKind::unexpected_angle: return "unexpected-angle";
    }
    return "?";
}

namespace {

std::string describe(ParseErrorKind kind, const std::string& token, std::size_t index) {
    std::string msg = "command ";
    msg += std::to_string(index);
    msg += " '";
    msg += token;
    msg += "': ";
    switch (kind) {
        case ParseErrorKind::empty: msg += "empty command"; break;
        case ParseErrorKind::unknown_keyword: msg += "unknown keyword"; break;
        case ParseErrorKind::missing_prefix: msg += "cw/ccw must be written as rotate:cw:V or rotate:ccw:V"; break;
        case ParseErrorKind::missing_angle: msg += "missing angle"; break;
        case ParseErrorKind::bad_angle: msg += "angle is not a finite decimal number"; break;
        case ParseErrorKind::unexpected_angle: msg += "reset takes no angle"; break;
    }
    return msg;
}

}  // namespace

ParseError::ParseError(ParseErrorKind kind, std::string token, std::size_t index)
    : Error(describe(kind, token, index)), kind_(kind), token_(std::move(token)), index_(index) {}

SchemaError::SchemaError(std::vector<std::string> problems)
    : Error([&] {
          std::string msg = "schema violation:";
          for (const auto& p : problems) msg += " [" + p + "]";
          return msg;
      }()),
      problems_(std::move(problems)) {}

RotationCommand RotationCommand::inverse() const {
    switch (direction) {
        case Direction::left: return {Direction::right, angle};
        case Direction::right: return {Direction::left, angle};
        case Direction::up: return {Direction::down, angle};
        case Direction::down: return {Direction::up, angle};
        case Direction::cw: return {Direction::ccw, angle};
        case Direction::ccw: return {Direction::cw, angle};
        case Direction::reset: return *this;
    }
    return *this;
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            parts.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return parts;
}

// [+-]? (digits [. digits?] | . digits) ([eE] [+-]? digits)?
bool is_decimal(std::string_view s) {
    std::size_t i = 0;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
    std::size_t int_digits = 0, frac_digits = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++int_digits;
    if (i < s.size() && s[i] == '.') {
        ++i;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++frac_digits;
    }
    if (int_digits + frac_digits == 0) return false;
    if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        ++i;
        if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
        std::size_t exp_digits = 0;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++exp_digits;
        if (exp_digits == 0) return false;
    }
    return i == s.size();
}

double parse_angle(std::string_view raw, const std::string& token, std::size_t index) {
    const std::string_view text = trim(raw);
    if (text.empty()) throw ParseError(ParseErrorKind::missing_angle, token, index);
    if (!is_decimal(text)) throw ParseError(ParseErrorKind::bad_angle, token, index);
    std::string_view digits = text;
    if (digits.front() == '+') digits.remove_prefix(1);
    double value = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || !std::isfinite(value))
        throw ParseError(ParseErrorKind::bad_angle, token, index);
    return value;
}

RotationCommand parse_at(std::string_view text, std::size_t index) {
    const std::string_view body = trim(text);
    const std::string token(body);
    if (body.empty()) throw ParseError(ParseErrorKind::empty, token, index);

    const auto fields = split(body, ':');
    const std::string head = lower(trim(fields[0]));

    static constexpr std::array<std::pair<const char*, Direction>, 4> planar{{
        {"left", Direction::left},
        {"right", Direction::right},
        {"up", Direction::up},
        {"down", Direction::down},
    }};
    for (const auto& [name, dir] : planar) {
        if (head != name) continue;
        if (fields.size() < 2) throw ParseError(ParseErrorKind::missing_angle, token, index);
        if (fields.size() > 2) throw ParseError(ParseErrorKind::bad_angle, token, index);
        return {dir, parse_angle(fields[1], token, index)};
    }

    if (head == "reset") {
        if (fields.size() > 1) throw ParseError(ParseErrorKind::unexpected_angle, token, index);
        return RotationCommand::reset();
    }

    if (head == "rotate") {
        if (fields.size() < 2) throw ParseError(ParseErrorKind::missing_angle, token, index);
        const std::string sense = lower(trim(fields[1]));
        Direction dir;
        if (sense == "cw")
            dir = Direction::cw;
        else if (sense == "ccw")
            dir = Direction::ccw;
        else
            throw ParseError(ParseErrorKind::unknown_keyword, token, index);
        if (fields.size() < 3) throw ParseError(ParseErrorKind::missing_angle, token, index);
        if (fields.size() > 3) throw ParseError(ParseErrorKind::bad_angle, token, index);
        return {dir, parse_angle(fields[2], token, index)};
    }

    if (head == "cw" || head == "ccw") throw ParseError(ParseErrorKind::missing_prefix, token, index);
    throw ParseError(ParseErrorKind::unknown_keyword, token, index);
}

}  // namespace

RotationCommand parse_command(std::string_view text) { return parse_at(text, 0); }

std::vector<RotationCommand> parse_sequence(std::string_view text) {
    std::vector<RotationCommand> out;
    std::size_t index = 0;
    for (const auto part : split(text, ',')) out.push_back(parse_at(part, index++));
    return out;
}

std::string format_command(const RotationCommand& cmd) {
    if (cmd.direction == Direction::reset) return "reset";
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), cmd.angle);
    std::string angle(buf.data(), res.ptr);
    switch (cmd.direction) {
        case Direction::cw: return "rotate:cw:" + angle;
        case Direction::ccw: return "rotate:ccw:" + angle;
        default: return std::string(to_string(cmd.direction)) + ":" + angle;
    }
}

std::string format_sequence(const std::vector<RotationCommand>& cmds) {
    std::string out;
    for (std::size_t i = 0; i < cmds.size(); ++i) {
        if (i) out += ',';
        out += format_command(cmds[i]);
    }
    return out;
}

}  // namespace imagery

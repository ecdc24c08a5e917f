#include <gtest/gtest.h>

#include <random>

#include "imagery/command.hpp"
#include "imagery/error.hpp"
#include "test_support.hpp"

using namespace imagery;

namespace {

ParseErrorKind kind_of(std::string_view text) {
    try {
        parse_command(text);
    } catch (const ParseError& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected a parse error for '" << text << "'";
    return ParseErrorKind::empty;
}

}  // namespace

TEST(ParseCommand, AcceptsEveryForm) {
    EXPECT_EQ(parse_command("left:30"), (RotationCommand{Direction::left, 30}));
    EXPECT_EQ(parse_command("left:0"), (RotationCommand{Direction::left, 0}));
    EXPECT_EQ(parse_command("right:15"), (RotationCommand{Direction::right, 15}));
    EXPECT_EQ(parse_command("up:10"), (RotationCommand{Direction::up, 10}));
    EXPECT_EQ(parse_command("down:12.5"), (RotationCommand{Direction::down, 12.5}));
    EXPECT_EQ(parse_command("rotate:cw:45"), (RotationCommand{Direction::cw, 45}));
    EXPECT_EQ(parse_command("rotate:ccw:35"), (RotationCommand{Direction::ccw, 35}));
    EXPECT_EQ(parse_command("reset"), RotationCommand::reset());
}

TEST(ParseCommand, ToleratesWhitespaceAndCase) {
    EXPECT_EQ(parse_command("  LEFT:30 "), (RotationCommand{Direction::left, 30}));
    EXPECT_EQ(parse_command("Rotate:CW:5"), (RotationCommand{Direction::cw, 5}));
    EXPECT_EQ(parse_command("\tReset\n"), RotationCommand::reset());
}

TEST(ParseCommand, NegativeAnglesAllowed) {
    EXPECT_EQ(parse_command("left:-30"), (RotationCommand{Direction::left, -30}));
    EXPECT_EQ(parse_command("up:+5"), (RotationCommand{Direction::up, 5}));
}

TEST(ParseCommand, ErrorCategories) {
    EXPECT_EQ(kind_of("cw"), ParseErrorKind::missing_prefix);
    EXPECT_EQ(kind_of("ccw:30"), ParseErrorKind::missing_prefix);
    EXPECT_EQ(kind_of("0"), ParseErrorKind::unknown_keyword);
    EXPECT_EQ(kind_of("turn:30"), ParseErrorKind::unknown_keyword);
    EXPECT_EQ(kind_of("rotate:sideways:30"), ParseErrorKind::unknown_keyword);
    EXPECT_EQ(kind_of("left"), ParseErrorKind::missing_angle);
    EXPECT_EQ(kind_of("left:"), ParseErrorKind::missing_angle);
    EXPECT_EQ(kind_of("rotate:cw"), ParseErrorKind::missing_angle);
    EXPECT_EQ(kind_of("left:abc"), ParseErrorKind::bad_angle);
    EXPECT_EQ(kind_of("left:inf"), ParseErrorKind::bad_angle);
    EXPECT_EQ(kind_of("left:1e999"), ParseErrorKind::bad_angle);
    EXPECT_EQ(kind_of("left:30:2"), ParseErrorKind::bad_angle);
    EXPECT_EQ(kind_of("reset:0"), ParseErrorKind::unexpected_angle);
    EXPECT_EQ(kind_of("   "), ParseErrorKind::empty);
}

TEST(ParseCommand, ErrorNamesTheToken) {
    try {
        parse_command("cw");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.token(), "cw");
        EXPECT_NE(std::string(e.what()).find("rotate:cw"), std::string::npos);
    }
}

TEST(ParseSequence, SplitsAndKeepsOrder) {
    const auto cmds = parse_sequence("right:15,right:15,up:10");
    ASSERT_EQ(cmds.size(), 3u);
    EXPECT_EQ(cmds[0], (RotationCommand{Direction::right, 15}));
    EXPECT_EQ(cmds[2], (RotationCommand{Direction::up, 10}));
    EXPECT_EQ(parse_sequence("left:30").size(), 1u);
}

TEST(ParseSequence, ReportsIndexOfBadToken) {
    try {
        parse_sequence("right:15,,up:10");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.index(), 1u);
        EXPECT_EQ(e.kind(), ParseErrorKind::empty);
    }
    try {
        parse_sequence("right:15,up:10,cw");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.index(), 2u);
    }
}

TEST(FormatCommand, ShortestForms) {
    EXPECT_EQ(format_command({Direction::left, 30}), "left:30");
    EXPECT_EQ(format_command({Direction::cw, 12.5}), "rotate:cw:12.5");
    EXPECT_EQ(format_command({Direction::ccw, -7}), "rotate:ccw:-7");
    EXPECT_EQ(format_command(RotationCommand::reset()), "reset");
}

TEST(FormatCommand, SequenceRoundTripProperty) {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> len(1, 12);
    for (int trial = 0; trial < 5000; ++trial) {
        std::vector<RotationCommand> cmds;
        const int n = len(rng);
        for (int i = 0; i < n; ++i)
            cmds.push_back(rng() % 13 == 0 ? RotationCommand::reset() : test_support::random_command(rng));
        ASSERT_EQ(parse_sequence(format_sequence(cmds)), cmds);
    }
}

TEST(ParseCommand, ArbitraryBytesNeverCrash) {
    std::mt19937_64 rng(5);
    const std::string alphabet = "leftrighupdowncwcrotase:0123456789.,-+eE \t\n\x01\xff";
    std::uniform_int_distribution<std::size_t> len(0, 24);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    for (int i = 0; i < 20000; ++i) {
        std::string s;
        const std::size_t n = len(rng);
        for (std::size_t k = 0; k < n; ++k) s += alphabet[pick(rng)];
        try {
            parse_sequence(s);
        } catch (const ParseError&) {
        }
    }
}

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <functional>

#include "imagery/error.hpp"
#include "imagery/session.hpp"

using namespace imagery;
namespace fs = std::filesystem;

namespace {

LoopConfig small_config() {
    LoopConfig c;
    c.settings.width = c.settings.height = 64;
    return c;
}

const Problem& problem() {
    static const Problem p = make_problem(21, {}, "t21");
    return p;
}

TurnOutput turn(int k, std::vector<CommandSequence> cmds, std::optional<ObjectLabel> answer = std::nullopt) {
    TurnOutput t;
    t.memory.rationale = "step " + std::to_string(k);
    t.iteration_number = k;
    t.commands = std::move(cmds);
    t.final_answer = answer;
    return t;
}

class ScriptAgent : public Agent {
public:
    explicit ScriptAgent(std::function<std::string(const TurnContext&)> f) : f_(std::move(f)) {}
    std::string name() const override { return "script"; }
    std::string respond(const TurnContext& ctx) override { return f_(ctx); }

private:
    std::function<std::string(const TurnContext&)> f_;
};

}  // namespace

TEST(LoopConfig, Validation) {
    LoopConfig c;
    EXPECT_NO_THROW(c.validate());
    c.min_iterations = 6;
    c.max_iterations = 5;
    EXPECT_THROW(c.validate(), ConfigError);
    EXPECT_TRUE(condition_config("C1-reset").reset_enabled);
    EXPECT_TRUE(condition_config("C2-360hint").hint_360);
    EXPECT_FALSE(condition_config("C3-incremental").reset_enabled);
    EXPECT_THROW(condition_config("C9"), ConfigError);
}

TEST(LoopConfig, JsonRoundTrip) {
    LoopConfig c = condition_config("C1-reset");
    c.max_iterations = 9;
    c.prompt_options.step_by_step = true;
    const LoopConfig back = loop_config_from_json(loop_config_json(c));
    EXPECT_EQ(loop_config_json(back), loop_config_json(c));
    EXPECT_EQ(loop_config_from_json(R"({"min_iterations": 2})").min_iterations, 2);
    EXPECT_THROW(loop_config_from_json(R"({"bogus": 1})"), ConfigError);
    EXPECT_THROW(loop_config_from_json(R"({"min_iterations": 0})"), ConfigError);
}

TEST(Session, StartsAtCalibratedPoses) {
    const LoopConfig c;
    Session s(problem(), c);
    EXPECT_EQ(s.iteration(), 0);
    const auto tiles = split_grid(render_problem(problem()));
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_TRUE(s.object(kAllLabels[i]).history.empty());
        EXPECT_EQ(s.snapshot(kAllLabels[i]), tiles[i]);
    }
}

TEST(Session, TurnProducesOneGridPerTarget) {
    Session s(problem(), small_config());
    const auto& rec = s.execute_turn(turn(1, {{ObjectLabel::A, parse_sequence("right:15,right:15,up:10")}}));
    ASSERT_EQ(rec.grids.size(), 4u);
    for (const auto& g : rec.grids) {
        const std::size_t cells = split_grid(g.grid).size();
        EXPECT_EQ(cells, g.target == ObjectLabel::A ? 3u : 1u) << to_string(g.target);
    }
    EXPECT_EQ(rec.grids[1].caption(), "A: right:15,right:15,up:10");
    EXPECT_TRUE(same_orientation(s.object(ObjectLabel::A).current_pose,
                                 apply_camera_rotation(apply_camera_rotation(apply_camera_rotation(problem().pose(ObjectLabel::A),
                                                                                                   {Direction::right, 15}),
                                                                             {Direction::right, 15}),
                                                       {Direction::up, 10})));
}

TEST(Session, MultipleSequencesForOneTargetConcatenate) {
    Session s(problem(), small_config());
    const auto& rec = s.execute_turn(turn(1, {{ObjectLabel::B, parse_sequence("left:10")},
                                              {ObjectLabel::B, parse_sequence("up:10,up:10")}}));
    EXPECT_EQ(split_grid(rec.grids[2].grid).size(), 3u);
}

TEST(Session, ResetAndOriginalRules) {
    Session plain(problem(), small_config());
    const auto& rec = plain.execute_turn(turn(1, {{ObjectLabel::A, {RotationCommand::reset()}},
                                                  {ObjectLabel::original, parse_sequence("left:30")}}));
    EXPECT_EQ(rec.errors.size(), 2u);
    EXPECT_TRUE(rec.executed.empty());
    EXPECT_TRUE(same_orientation(plain.object(ObjectLabel::A).current_pose, problem().pose(ObjectLabel::A)));
    EXPECT_THROW(plain.apply(ObjectLabel::A, RotationCommand::reset()), ContractError);

    LoopConfig c1 = small_config();
    c1.reset_enabled = true;
    Session s(problem(), c1);
    s.execute_turn(turn(1, {{ObjectLabel::A, {RotationCommand::reset()}}}));
    EXPECT_TRUE(same_orientation(s.object(ObjectLabel::A).current_pose, Pose::identity()));
    // A reset matchable option renders as a grid rotation of the original.
    for (ObjectLabel l : kOptionLabels) {
        if (l == problem().odd) continue;
        bool found = false;
        for (const auto& r : canonical_orientations())
            found = found || render(problem().object(l), Pose::identity(), c1.rig, c1.settings) ==
                                 render(normalize(rotate(problem().original, r)), Pose::identity(), c1.rig, c1.settings);
        EXPECT_TRUE(found);
    }
}

TEST(Session, SequenceCapAndStaleIteration) {
    LoopConfig c = small_config();
    c.max_sequences = 2;
    Session s(problem(), c);
    std::vector<CommandSequence> cmds(3, {ObjectLabel::C, parse_sequence("left:5")});
    const auto& rec = s.execute_turn(turn(1, cmds));
    EXPECT_EQ(rec.executed.size(), 2u);
    EXPECT_EQ(rec.errors.size(), 1u);
    EXPECT_THROW(s.execute_turn(turn(1, cmds)), IterationMismatchError);
    EXPECT_THROW(s.submit(serialize_turn_output(turn(5, cmds)), true), IterationMismatchError);
    EXPECT_EQ(s.iteration(), 1);
}

TEST(Session, EarlyAnswerDeferredThenAccepted) {
    Session s(problem(), small_config());
    s.execute_turn(turn(1, {}, ObjectLabel::B));
    EXPECT_FALSE(s.finished());
    EXPECT_NE(s.build_context().feedback.find("not accepted"), std::string::npos);
    for (int k = 2; k <= 4; ++k) s.execute_turn(turn(k, {{ObjectLabel::A, parse_sequence("left:0")}}));
    EXPECT_FALSE(s.finished());
    s.execute_turn(turn(5, {}, ObjectLabel::B));
    EXPECT_TRUE(s.finished());
    EXPECT_EQ(s.transcript().status, SessionStatus::answered);
    EXPECT_EQ(s.transcript().final_answer, ObjectLabel::B);
}

TEST(Session, ContextCarriesOnlyLastIteration) {
    Session s(problem(), small_config());
    TurnContext first = s.build_context();
    EXPECT_EQ(first.iteration_number, 1);
    EXPECT_TRUE(first.last_grids.empty());
    EXPECT_TRUE(first.previous_outputs.empty());
    s.execute_turn(turn(1, {{ObjectLabel::A, parse_sequence("left:30,left:30")}}));
    s.execute_turn(turn(2, {{ObjectLabel::C, parse_sequence("up:30")}}));
    const TurnContext ctx = s.build_context();
    EXPECT_EQ(ctx.iteration_number, 3);
    ASSERT_EQ(ctx.previous_outputs.size(), 2u);
    ASSERT_EQ(ctx.last_grids.size(), 4u);
    EXPECT_EQ(ctx.last_grids[1].caption, "A: current view");
    EXPECT_EQ(ctx.last_grids[3].caption, "C: up:30");
    EXPECT_EQ(ctx.original_snapshot, s.snapshot(ObjectLabel::original));
    EXPECT_EQ(serialize_turn_context(ctx).size(), 5u);
}

TEST(RunLoop, EarlyAnsweringAgentRunsMinimumIterations) {
    ScriptAgent agent([](const TurnContext& ctx) {
        return serialize_turn_output(turn(ctx.iteration_number, {}, ObjectLabel::C));
    });
    Session s(problem(), small_config());
    const auto t = run_loop(s, agent);
    EXPECT_EQ(t.iterations.size(), 5u);
    EXPECT_EQ(t.final_answer, ObjectLabel::C);
    for (const auto& rec : t.iterations) EXPECT_EQ(rec.grids.size(), 4u);
}

TEST(RunLoop, MalformedOnlyAgentFailsAtBudget) {
    ScriptAgent agent([](const TurnContext&) { return std::string("0"); });
    LoopConfig c = small_config();
    c.max_iterations = 6;
    Session s(problem(), c);
    const auto t = run_loop(s, agent);
    EXPECT_EQ(t.iterations.size(), 6u);
    EXPECT_EQ(t.status, SessionStatus::failed);
    EXPECT_FALSE(t.final_answer);
    for (const auto& rec : t.iterations) EXPECT_EQ(rec.grids.size(), 4u);
}

TEST(RunLoop, BudgetUsesPartialConclusion) {
    ScriptAgent agent([](const TurnContext& ctx) {
        TurnOutput t = turn(ctx.iteration_number, {{ObjectLabel::A, parse_sequence("left:0")}});
        t.memory.partial_conclusion = {Conclusion::probably_not_the_answer, Conclusion::unknown,
                                       Conclusion::probably_not_the_answer};
        return serialize_turn_output(t);
    });
    LoopConfig c = small_config();
    c.max_iterations = 5;
    Session s(problem(), c);
    const auto t = run_loop(s, agent);
    EXPECT_EQ(t.status, SessionStatus::budget_vote);
    EXPECT_EQ(t.final_answer, ObjectLabel::B);
}

TEST(RunLoop, TransportFailureMarksFailed) {
    ScriptAgent agent([](const TurnContext&) -> std::string { throw TransportError("down"); });
    Session s(problem(), small_config());
    const auto t = run_loop(s, agent);
    EXPECT_EQ(t.status, SessionStatus::failed);
    EXPECT_TRUE(t.iterations.empty());
    EXPECT_NE(t.failure.find("down"), std::string::npos);
}

TEST(Transcript, ReplayAndPersistence) {
    int calls = 0;
    ScriptAgent agent([&](const TurnContext& ctx) {
        ++calls;
        return serialize_turn_output(turn(ctx.iteration_number,
                                          {{ObjectLabel::A, parse_sequence("right:17.5,up:3")},
                                           {ObjectLabel::C, parse_sequence("rotate:cw:40")}},
                                          ctx.iteration_number >= 5 ? std::optional(ObjectLabel::A) : std::nullopt));
    });
    Session s(problem(), small_config());
    const auto t = run_loop(s, agent);
    const auto replayed = replay_poses(problem(), t);
    for (ObjectLabel l : kAllLabels)
        EXPECT_GE(std::abs(replayed[static_cast<std::size_t>(l)].orientation.dot(s.object(l).current_pose.orientation)),
                  1 - 1e-9);

    const fs::path dir = fs::temp_directory_path() / "imagery_test_transcript";
    fs::remove_all(dir);
    save_transcript(t, dir);
    EXPECT_TRUE(fs::exists(dir / "iterations" / "05_C.png"));
    EXPECT_TRUE(fs::exists(dir / "timing.json"));
    std::ifstream in(dir / "transcript.json");
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    EXPECT_EQ(text, transcript_json(t));
    const SessionTranscript back = transcript_from_json(text);
    const auto again = replay_poses(problem(), back);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(again[i].orientation.w, replayed[i].orientation.w);
    EXPECT_EQ(transcript_json(back), text);
    EXPECT_NE(format_transcript_markdown(t).find("## Iteration 5"), std::string::npos);
    fs::remove_all(dir);
}

TEST(Transcript, DeterministicBytes) {
    auto run = [] {
        ScriptAgent agent([](const TurnContext& ctx) {
            return serialize_turn_output(turn(ctx.iteration_number, {{ObjectLabel::B, parse_sequence("left:30")}},
                                              ObjectLabel::B));
        });
        Session s(problem(), small_config());
        return transcript_json(run_loop(s, agent));
    };
    EXPECT_EQ(run(), run());
}

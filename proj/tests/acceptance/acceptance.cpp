#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../unit/fixture_server.hpp"
#include "imagery/agents.hpp"
#include "imagery/error.hpp"
#include "imagery/eval.hpp"
#include "imagery/forge.hpp"
#include "imagery/random.hpp"
#include "imagery/render.hpp"
#include "imagery/session.hpp"

using namespace imagery;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double limit_s;
    std::function<Outcome()> run;
};

const fs::path kSource = IMAGERY_SOURCE_DIR;

std::string fmt(double v, int prec = 3) {
    std::ostringstream ss;
    ss.precision(prec);
    ss << v;
    return ss.str();
}

// ---- independent oracles ----

using IMat = std::array<std::array<int, 3>, 3>;
using Cells = std::vector<std::array<int, 3>>;

IMat imul(const IMat& a, const IMat& b) {
    IMat r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
    return r;
}

// Closure of the quarter turns about X and Y.
std::vector<IMat> oracle_group() {
    const IMat id{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    const IMat rx{{{1, 0, 0}, {0, 0, -1}, {0, 1, 0}}};
    const IMat ry{{{0, 0, 1}, {0, 1, 0}, {-1, 0, 0}}};
    std::set<IMat> seen{id};
    std::vector<IMat> queue{id};
    for (std::size_t i = 0; i < queue.size(); ++i) {
        for (const auto& g : {rx, ry}) {
            const IMat n = imul(g, queue[i]);
            if (seen.insert(n).second) queue.push_back(n);
        }
    }
    return queue;
}

Cells shift_sorted(Cells c) {
    std::array<int, 3> lo{INT32_MAX, INT32_MAX, INT32_MAX};
    for (const auto& v : c)
        for (int k = 0; k < 3; ++k) lo[k] = std::min(lo[k], v[k]);
    for (auto& v : c)
        for (int k = 0; k < 3; ++k) v[k] -= lo[k];
    std::sort(c.begin(), c.end());
    return c;
}

Cells oracle_canon(const Cells& c) {
    static const auto group = oracle_group();
    Cells best;
    for (const auto& g : group) {
        Cells r;
        for (const auto& v : c) {
            std::array<int, 3> w{};
            for (int i = 0; i < 3; ++i) w[i] = g[i][0] * v[0] + g[i][1] * v[1] + g[i][2] * v[2];
            r.push_back(w);
        }
        r = shift_sorted(std::move(r));
        if (best.empty() || r < best) best = std::move(r);
    }
    return best;
}

Cells cells_of(const Polycube& p) {
    Cells c;
    for (const auto& v : p.cells()) c.push_back({v.x, v.y, v.z});
    return c;
}

Cells oracle_mirror(Cells c) {
    for (auto& v : c) v[0] = -v[0];
    return c;
}

Polycube to_polycube(const Cells& c) {
    std::vector<VoxelCoord> v;
    for (const auto& a : c) v.push_back({a[0], a[1], a[2]});
    return Polycube(std::move(v));
}

// Fixed polycubes (distinct up to translation) of every size up to n.
std::vector<std::set<Cells>> enumerate_fixed(int n) {
    std::vector<std::set<Cells>> by_size(n + 1);
    by_size[1].insert(Cells{{0, 0, 0}});
    static constexpr int d[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (int k = 1; k < n; ++k) {
        for (const auto& c : by_size[k]) {
            for (const auto& v : c) {
                for (const auto& s : d) {
                    std::array<int, 3> w{v[0] + s[0], v[1] + s[1], v[2] + s[2]};
                    if (std::find(c.begin(), c.end(), w) != c.end()) continue;
                    Cells g = c;
                    g.push_back(w);
                    by_size[k + 1].insert(shift_sorted(std::move(g)));
                }
            }
        }
    }
    return by_size;
}

using Mat = std::array<std::array<double, 3>, 3>;

Mat axis_rotation(int axis, double deg) {
    const double t = deg * std::numbers::pi / 180.0, c = std::cos(t), s = std::sin(t);
    Mat m{};
    const int a = (axis + 1) % 3, b = (axis + 2) % 3;
    m[axis][axis] = 1;
    m[a][a] = c;
    m[b][b] = c;
    m[a][b] = -s;
    m[b][a] = s;
    return m;
}

Mat mmul(const Mat& a, const Mat& b) {
    Mat r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
    return r;
}

// Camera-axis convention: right/down/ccw are positive turns about +Y/+X/+Z.
Mat oracle_command(const RotationCommand& c) {
    switch (c.direction) {
        case Direction::right: return axis_rotation(1, c.angle);
        case Direction::left: return axis_rotation(1, -c.angle);
        case Direction::down: return axis_rotation(0, c.angle);
        case Direction::up: return axis_rotation(0, -c.angle);
        case Direction::ccw: return axis_rotation(2, c.angle);
        case Direction::cw: return axis_rotation(2, -c.angle);
        case Direction::reset: break;
    }
    return axis_rotation(0, 0);
}

double max_abs_diff(const Mat3& a, const Mat& b) {
    double d = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) d = std::max(d, std::abs(a.m[i][j] - b[i][j]));
    return d;
}

Pose random_pose(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return {Quat{n(rng), n(rng), n(rng), n(rng)}.normalized()};
}

RotationCommand random_command(std::mt19937_64& rng) {
    static constexpr Direction dirs[] = {Direction::left, Direction::right, Direction::up,
                                         Direction::down, Direction::cw,    Direction::ccw};
    std::uniform_int_distribution<int> pick(0, 5);
    std::uniform_real_distribution<double> angle(-360.0, 360.0);
    return {dirs[pick(rng)], angle(rng)};
}

const ProblemSet& shipped_set() {
    static const ProblemSet s = load_problem_set(kSource / "data/default_set");
    return s;
}

// ---- criteria ----

Outcome geometry_algebra() {
    const auto& g = canonical_orientations();
    std::set<GridRotation> members(g.begin(), g.end());
    bool ok = g.size() == 24 && members.size() == 24 && members.count(GridRotation::identity());
    int closure_fail = 0, inverse_fail = 0;
    for (const auto& a : g) {
        if (!members.count(a.inverse()) || !(a * a.inverse() == GridRotation::identity())) ++inverse_fail;
        for (const auto& b : g) closure_fail += !members.count(a * b);
    }
    std::set<IMat> oracle;
    for (const auto& m : oracle_group()) oracle.insert(m);
    std::set<IMat> lib;
    for (const auto& r : g) lib.insert(r.m);
    const bool same_group = oracle == lib;

    Pose p = Pose::identity();
    for (int i = 0; i < 12; ++i) p = apply_camera_rotation(p, {Direction::left, 30});
    const double twelve = max_abs_diff(p.matrix(), axis_rotation(0, 0));
    const bool twelve_ok = twelve <= 1e-9 && same_orientation(p, Pose::identity(), 1e-9);

    std::mt19937_64 rng(2024);
    int cancel_fail = 0, convention_fail = 0;
    for (int i = 0; i < 10000; ++i) {
        const Pose q = random_pose(rng);
        const RotationCommand c = random_command(rng);
        const Pose once = apply_camera_rotation(q, c);
        if (!same_orientation(apply_camera_rotation(once, c.inverse()), q, 1e-9)) ++cancel_fail;
        if (max_abs_diff(once.matrix(), mmul(oracle_command(c), q.matrix().m)) > 1e-9) ++convention_fail;
    }
    ok = ok && closure_fail == 0 && inverse_fail == 0 && same_group && twelve_ok && cancel_fail == 0 &&
         convention_fail == 0;
    return {ok, "group " + std::to_string(g.size()) + " (closure misses " + std::to_string(closure_fail) +
                    ", inverse misses " + std::to_string(inverse_fail) + ", equals oracle " +
                    (same_group ? "yes" : "no") + "); 12x left:30 max dev " + fmt(twelve) + "; 10^4 inverse pairs: " +
                    std::to_string(cancel_fail) + " misses; camera-axis oracle misses " +
                    std::to_string(convention_fail)};
}

Outcome equivalence_oracle() {
    const auto by_size = enumerate_fixed(5);
    const std::array<std::size_t, 6> known_fixed{0, 1, 3, 15, 86, 534};
    const std::array<std::size_t, 6> known_one_sided{0, 1, 1, 2, 8, 29};
    std::vector<Polycube> pool;
    std::vector<Cells> canon;
    bool counts_ok = true;
    for (int k = 1; k <= 5; ++k) {
        std::set<Cells> classes;
        for (const auto& c : by_size[k]) {
            pool.push_back(to_polycube(c));
            canon.push_back(oracle_canon(c));
            classes.insert(canon.back());
        }
        counts_ok = counts_ok && by_size[k].size() == known_fixed[k] && classes.size() == known_one_sided[k];
    }
    const std::size_t small = pool.size();
    GenerationConstraints big;
    big.min_cubes = 6;
    big.max_cubes = 8;
    big.max_height = 3;
    for (std::uint64_t s = 0; s < 100; ++s) {
        pool.push_back(generate_polycube(Rng::derive(606, s), big));
        canon.push_back(oracle_canon(cells_of(pool.back())));
    }

    const std::size_t n = pool.size();
    std::vector<std::vector<bool>> rel(n, std::vector<bool>(n));
    std::size_t oracle_mismatch = 0, reflexive_fail = 0, symmetric_fail = 0, transitive_fail = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            rel[i][j] = rotation_equivalent(pool[i], pool[j]);
            oracle_mismatch += rel[i][j] != (canon[i] == canon[j]);
        }
    for (std::size_t i = 0; i < n; ++i) {
        reflexive_fail += !rel[i][i];
        for (std::size_t j = 0; j < n; ++j) {
            symmetric_fail += rel[i][j] != rel[j][i];
            if (!rel[i][j]) continue;
            for (std::size_t k = 0; k < n; ++k) transitive_fail += rel[j][k] && !rel[i][k];
        }
    }

    std::size_t chiral = 0, chiral_fail = 0, rotation_fail = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const bool oracle_chiral = oracle_canon(oracle_mirror(cells_of(pool[i]))) != canon[i];
        if (is_chiral(pool[i]) != oracle_chiral) ++chiral_fail;
        if (oracle_chiral) {
            ++chiral;
            if (rotation_equivalent(pool[i], mirror(pool[i]))) ++chiral_fail;
        }
        for (const auto& r : canonical_orientations()) rotation_fail += !rotation_equivalent(pool[i], rotate(pool[i], r));
    }
    const bool ok = counts_ok && oracle_mismatch == 0 && reflexive_fail == 0 && symmetric_fail == 0 &&
                    transitive_fail == 0 && chiral > 0 && chiral_fail == 0 && rotation_fail == 0;
    return {ok, std::to_string(small) + " polycubes <= 5 cells + 100 of 6-8 cells (counts " +
                    (counts_ok ? "match" : "differ") + "); oracle mismatches " + std::to_string(oracle_mismatch) +
                    ", reflexive/symmetric/transitive failures " + std::to_string(reflexive_fail) + "/" +
                    std::to_string(symmetric_fail) + "/" + std::to_string(transitive_fail) + "; " +
                    std::to_string(chiral) + " chiral members, mirror failures " + std::to_string(chiral_fail) +
                    "; rotation failures " + std::to_string(rotation_fail) + " of " + std::to_string(24 * n)};
}

Outcome renderer_determinism() {
    std::mt19937_64 rng(5150);
    int differing = 0;
    for (int i = 0; i < 50; ++i) {
        const Polycube p = generate_polycube(Rng::derive(5150, i));
        const Pose q = random_pose(rng);
        if (encode_png(render(p, q)) != encode_png(render(p, q))) ++differing;
    }
    int inconsistent = 0, checked = 0;
    for (int i = 0; i < 5; ++i) {
        const Polycube p = generate_polycube(Rng::derive(5151, i));
        const Pose q = random_pose(rng);
        const RasterImage base = render(p, q);
        for (const auto& r : canonical_orientations()) {
            const Pose counter{(q.orientation * r.inverse().quat()).normalized()};
            const RasterImage other = render(rotate(p, r), counter);
            ++checked;
            if (image_diff(base, other) != 0.0 || !(base == other)) ++inconsistent;
        }
    }
    return {differing == 0 && inconsistent == 0,
            "50 scenes: " + std::to_string(differing) + " differing PNGs; view consistency nonzero diffs " +
                std::to_string(inconsistent) + " of " + std::to_string(checked)};
}

Outcome dataset_audit() {
    const ProblemSet set = make_problem_set(4040, 40);
    int audited = 0;
    for (const auto& p : set.problems) {
        const Cells ref = oracle_canon(cells_of(p.original));
        int odd_count = 0;
        bool labelled = false;
        for (ObjectLabel l : {ObjectLabel::A, ObjectLabel::B, ObjectLabel::C}) {
            if (oracle_canon(cells_of(p.object(l))) != ref) {
                ++odd_count;
                labelled = l == p.odd;
            }
        }
        audited += odd_count == 1 && labelled;
    }
    const fs::path dir = fs::temp_directory_path() / ("imagery_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    RenderSettings small;
    small.width = small.height = 64;
    save_problem_set(set, dir, {}, small);
    const bool round_trip = load_problem_set(dir) == set;
    fs::remove_all(dir);

    const ProblemSet many = make_problem_set(400400, 400);
    std::map<ObjectLabel, int> counts;
    for (const auto& p : many.problems) ++counts[p.odd];
    bool uniform = true;
    std::string spread;
    for (ObjectLabel l : {ObjectLabel::A, ObjectLabel::B, ObjectLabel::C}) {
        const double share = counts[l] / 400.0;
        uniform = uniform && std::abs(share - 1.0 / 3.0) <= 0.1 / 3.0;
        spread += std::string(spread.empty() ? "" : " ") + to_string(l) + "=" + std::to_string(counts[l]);
    }
    return {audited == 40 && round_trip && uniform,
            "audit " + std::to_string(audited) + "/40; save/load " + (round_trip ? "equal" : "different") +
                "; odd labels over 400 seeds " + spread + " (allowed 120-146 each)"};
}

Outcome scripted_benchmark(const std::string& agent, const std::string& condition, double required) {
    RunConfig c;
    c.dataset = kSource / "data/default_set";
    c.agent = agent;
    c.condition = condition;
    const ProblemSet& set = shipped_set();
    AgentFactory make;
    if (agent == "orbit_search") {
        make = [](int) -> std::unique_ptr<Agent> {
            OrbitSearchConfig oc;
            oc.step_deg = 30;
            return std::make_unique<OrbitSearchAgent>(oc);
        };
    } else {
        make = agent_factory(c, set);
    }
    const EvalReport r = run_benchmark(c, set, make);
    const auto& s = r.runs.at(0);
    return {s.attempted == 40 && s.strict_accuracy() >= required,
            agent + " on " + condition + ": " + std::to_string(s.correct) + "/" + std::to_string(s.attempted) +
                " correct, " + std::to_string(s.failed) + " failed (" + format_percent(s.strict_accuracy()) +
                "%; required " + format_percent(required) + "%)"};
}

// Answers A on every turn with zero-rotation snapshots of one option.
class EagerAgent : public Agent {
public:
    std::string name() const override { return "eager"; }
    std::string respond(const TurnContext& ctx) override {
        TurnOutput t;
        t.memory.rationale = "eager";
        t.memory.partial_conclusion[0] = Conclusion::probably_the_odd_one;
        t.iteration_number = ctx.iteration_number;
        t.final_answer = ObjectLabel::A;
        return serialize_turn_output(t);
    }
};

// Random command sequences, then an answer after `turns` iterations.
class WanderAgent : public Agent {
public:
    WanderAgent(std::uint64_t seed, int turns) : rng_(seed), turns_(turns) {}
    std::string name() const override { return "wander"; }
    std::string respond(const TurnContext& ctx) override {
        TurnOutput t;
        t.memory.rationale = "wander";
        t.iteration_number = ctx.iteration_number;
        if (ctx.iteration_number >= turns_) {
            t.final_answer = ObjectLabel::B;
            return serialize_turn_output(t);
        }
        std::uniform_int_distribution<int> count(1, 3), steps(1, 6), label(1, 3), reset(0, 9);
        for (int s = count(rng_); s > 0; --s) {
            CommandSequence seq;
            seq.target = static_cast<ObjectLabel>(label(rng_));
            for (int k = steps(rng_); k > 0; --k) {
                if (ctx.reset_enabled && reset(rng_) == 0) seq.steps.push_back(RotationCommand::reset());
                else seq.steps.push_back(random_command(rng_));
            }
            t.commands.push_back(seq);
        }
        return serialize_turn_output(t);
    }

private:
    std::mt19937_64 rng_;
    int turns_;
};

Outcome loop_contract() {
    const auto& problems = shipped_set().problems;
    std::string detail;
    bool ok = true;
    int sessions = 0, short_sessions = 0, partial_iterations = 0;
    for (std::size_t i = 0; i < 8; ++i) {
        LoopConfig c;
        c.min_iterations = 5;
        c.settings.width = c.settings.height = 48;
        Session s(problems[i], c);
        EagerAgent agent;
        const auto t = run_loop(s, agent);
        ++sessions;
        if (t.iterations.size() < 5 || t.status != SessionStatus::answered || t.final_answer != ObjectLabel::A)
            ++short_sessions;
        for (const auto& rec : t.iterations) {
            bool full = rec.grids.size() == 4;
            for (std::size_t k = 0; full && k < 4; ++k) full = rec.grids[k].target == static_cast<ObjectLabel>(k);
            partial_iterations += !full;
        }
    }
    ok = short_sessions == 0 && partial_iterations == 0;
    detail = "eager answerer: " + std::to_string(short_sessions) + " of " + std::to_string(sessions) +
             " sessions under 5 iterations, " + std::to_string(partial_iterations) +
             " iterations missing an object";

    int replayed = 0, replay_fail = 0;
    double worst = 0;
    for (const char* cond : {"C1-reset", "C2-360hint", "C3-incremental"}) {
        for (std::size_t i = 0; i < 6; ++i) {
            LoopConfig c = condition_config(cond);
            c.settings.width = c.settings.height = 32;
            Session s(problems[i], c);
            WanderAgent agent(Rng::derive(77, i), 9);
            run_loop(s, agent);
            const auto t = transcript_from_json(transcript_json(s.transcript()));
            const auto poses = replay_poses(problems[i], t);
            for (std::size_t l = 0; l < 4; ++l) {
                const Quat a = poses[l].orientation, b = s.object(static_cast<ObjectLabel>(l)).current_pose.orientation;
                const double sign = a.dot(b) < 0 ? -1 : 1;
                const double dev = std::max({std::abs(a.w - sign * b.w), std::abs(a.x - sign * b.x),
                                             std::abs(a.y - sign * b.y), std::abs(a.z - sign * b.z)});
                worst = std::max(worst, dev);
                replay_fail += dev > 1e-9;
            }
            ++replayed;
        }
    }
    ok = ok && replay_fail == 0;
    detail += "; replay of " + std::to_string(replayed) + " transcripts: max quaternion deviation " + fmt(worst) +
              ", " + std::to_string(replay_fail) + " poses off";
    return {ok, detail};
}

Outcome probe_verifier() {
    const auto& problems = shipped_set().problems;
    int pairs = 0, matched = 0, flips = 0, mirrored = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& p = problems[i];
        for (const auto& pair : make_sweep_dataset(p.original, p.pose(ObjectLabel::original))) {
            ++pairs;
            const EulerAnglesDeg e = euler_of(pair.applied);
            matched += verify_euler_prediction(pair, e).verdict == EulerVerdict::match;
            if (std::fmod(pair.applied.angle, 180.0) == 0) continue;
            EulerAnglesDeg f = e;
            if (pair.applied.direction == Direction::up || pair.applied.direction == Direction::down) f.pitch = -f.pitch;
            else if (pair.applied.direction == Direction::left || pair.applied.direction == Direction::right) f.yaw = -f.yaw;
            else f.roll = -f.roll;
            ++flips;
            mirrored += verify_euler_prediction(pair, f).verdict == EulerVerdict::mirror;
        }
    }
    return {pairs == 108 && matched == pairs && flips > 0 && mirrored == flips,
            "ground truth match " + std::to_string(matched) + "/" + std::to_string(pairs) + "; sign flips mirror " +
                std::to_string(mirrored) + "/" + std::to_string(flips) + " (0 and 180 have no distinct flip)"};
}

Outcome parser_contract() {
    const std::vector<std::pair<std::string, RotationCommand>> forms{
        {"left:30", {Direction::left, 30}},          {"right:15", {Direction::right, 15}},
        {"up:10", {Direction::up, 10}},              {"down:12.5", {Direction::down, 12.5}},
        {"rotate:cw:45", {Direction::cw, 45}},       {"rotate:ccw:35", {Direction::ccw, 35}},
        {"reset", RotationCommand::reset()},         {"  LEFT:30 ", {Direction::left, 30}},
        {"Rotate:CW:5", {Direction::cw, 5}},         {"left:0", {Direction::left, 0}},
        {"right:-15", {Direction::right, -15}},      {"up:+5", {Direction::up, 5}},
    };
    int accepted = 0;
    for (const auto& [text, want] : forms) {
        try {
            accepted += parse_command(text) == want;
        } catch (const ParseError&) {
        }
    }
    bool sequence_ok = false;
    try {
        const auto seq = parse_sequence("right:15,up:10,rotate:cw:5,reset");
        sequence_ok = seq.size() == 4 && seq[2] == RotationCommand{Direction::cw, 5} && seq[3].direction == Direction::reset;
    } catch (const ParseError&) {
    }
    auto kind = [](const std::string& s) -> std::optional<ParseErrorKind> {
        try {
            parse_command(s);
        } catch (const ParseError& e) {
            return e.kind();
        }
        return std::nullopt;
    };
    const bool rejects = kind("cw") == ParseErrorKind::missing_prefix && kind("0") == ParseErrorKind::unknown_keyword;

    static const std::vector<std::string> pieces{"left", "right", "up", "down", "rotate", "cw", "ccw", "reset", ":",
                                                 ",",    "-",     "+",  ".",    "e",      "0",  "9",   "30",    " ",
                                                 "\t",   "1e999", "nan", "inf", "\xff",   "\x01", "LEFT", "::"};
    std::mt19937_64 rng(1000000);
    std::uniform_int_distribution<int> len(0, 12), piece(0, static_cast<int>(pieces.size()) - 1), byte(0, 255),
        mode(0, 3);
    long crashes = 0, ok_count = 0;
    for (int i = 0; i < 1000000; ++i) {
        std::string s;
        if (i % 2 == 0) {
            for (int k = len(rng); k > 0; --k) {
                if (mode(rng) == 0) s.push_back(static_cast<char>(byte(rng)));
                else s += pieces[piece(rng)];
            }
        } else {
            // Valid sequence with one random edit.
            std::vector<RotationCommand> seq;
            for (int k = 1 + len(rng) % 4; k > 0; --k) seq.push_back(random_command(rng));
            s = format_sequence(seq);
            std::uniform_int_distribution<std::size_t> at(0, s.size());
            const std::size_t pos = at(rng);
            switch (mode(rng)) {
                case 0: s.insert(pos, 1, static_cast<char>(byte(rng))); break;
                case 1: if (pos < s.size()) s.erase(pos, 1); break;
                case 2: s.insert(pos, pieces[piece(rng)]); break;
                default: break;
            }
        }
        try {
            const auto seq = parse_sequence(s);
            ++ok_count;
            if (parse_sequence(format_sequence(seq)) != seq) ++crashes;
        } catch (const ParseError&) {
        } catch (...) {
            ++crashes;
        }
    }
    return {accepted == static_cast<int>(forms.size()) && sequence_ok && rejects && crashes == 0,
            std::to_string(accepted) + "/" + std::to_string(forms.size()) + " forms accepted, sequence " +
                (sequence_ok ? "ok" : "bad") + "; cw/0 categories " + (rejects ? "ok" : "wrong") +
                "; fuzz 10^6 strings: " + std::to_string(crashes) + " crashes (" + std::to_string(ok_count) +
                " parsed)"};
}

std::string zero_turn(int k) {
    TurnOutput t;
    t.memory.rationale = "fixture";
    t.iteration_number = k;
    t.commands = {{ObjectLabel::B, {{Direction::left, 0}}}};
    return serialize_turn_output(t);
}

Outcome mock_remote() {
    ::setenv("IMAGERY_ACCEPTANCE_TOKEN", "acceptance-token", 1);
    auto config_for = [](const FixtureServer& server) {
        RemoteChatConfig c;
        c.endpoint = server.endpoint();
        c.model = "fixture";
        c.token_env = "IMAGERY_ACCEPTANCE_TOKEN";
        c.backoff = std::chrono::milliseconds(1);
        return c;
    };
    const auto& problems = shipped_set().problems;
    LoopConfig lc;
    lc.settings.width = lc.settings.height = 48;
    Session probe_session(problems[0], lc);
    const TurnContext ctx = probe_session.build_context();

    // Transport: retry after 503, give up after repeated 500, 401 is a config error.
    bool transport = true;
    {
        FixtureServer server;
        RemoteAgent agent(config_for(server));
        server.script({{503, ""}, {200, zero_turn(1)}});
        try {
            agent.respond(ctx);
        } catch (...) {
            transport = false;
        }
        const auto before = server.bodies().size();
        server.script({{500, ""}});
        try {
            agent.respond(ctx);
            transport = false;
        } catch (const TransportError&) {
        }
        transport = transport && server.bodies().size() - before == 3;
        server.script({{401, ""}});
        try {
            agent.respond(ctx);
            transport = false;
        } catch (const ConfigError&) {
        }
        const auto auth = server.auth();
        transport = transport && !auth.empty() && auth.front() == "Bearer acceptance-token";
    }

    // Repair: an unusable reply is answered with the parse error once.
    bool repair = true;
    {
        FixtureServer server;
        RemoteAgent agent(config_for(server));
        server.script({{200, "cw"}, {200, zero_turn(1)}});
        try {
            parse_turn_output(agent.respond(ctx));
            const auto bodies = server.bodies();
            const auto msgs = nlohmann::json::parse(bodies.back())["messages"];
            repair = bodies.size() == 2 && msgs[msgs.size() - 2]["content"] == "cw";
        } catch (...) {
            repair = false;
        }
        server.script({{200, "prose"}, {200, "more prose"}});
        try {
            agent.respond(ctx);
            repair = false;
        } catch (const MalformedReplyError& e) {
            repair = repair && e.raw() == "more prose";
        }
    }

    // End to end: answers A at iteration 5. Every fourth session only gets
    // 500s. Sessions run in order on one worker; a retry repeats its body.
    const std::regex turn(R"(produce iteration (\d+))");
    ProblemSet set = shipped_set();
    set.problems.resize(12);
    int session = -1;
    std::string last_body;
    FixtureServer server([&](const nlohmann::json& req) {
        int k = 1;
        for (const auto& part : req["messages"].back()["content"]) {
            std::smatch m;
            const std::string text = part.is_string() ? part.get<std::string>() : part.value("text", "");
            if (std::regex_search(text, m, turn)) k = std::stoi(m[1]);
        }
        const std::string body = req.dump();
        if (k == 1 && body != last_body) ++session;
        last_body = body;
        if (session % 4 == 0) return FixtureServer::Reply{500, ""};
        if (k < 5) return FixtureServer::Reply{200, zero_turn(k)};
        TurnOutput t;
        t.memory.rationale = "fixture";
        t.memory.partial_conclusion[0] = Conclusion::probably_the_odd_one;
        t.iteration_number = k;
        t.final_answer = ObjectLabel::A;
        return FixtureServer::Reply{200, serialize_turn_output(t)};
    });
    const auto rc = RunConfig::from_json(R"({"agent":"remote","condition":"C3-incremental","workers":1,
        "overrides":{"width":48,"height":48},
        "remote":{"endpoint":")" + server.endpoint() + R"(","model":"fixture","token_env":"IMAGERY_ACCEPTANCE_TOKEN",
        "backoff_ms":1}})");
    const auto r = run_benchmark(rc, set, agent_factory(rc, set));
    int expected = 0, expected_failed = 0, scored = 0;
    for (std::size_t i = 0; i < set.problems.size(); ++i) {
        const auto& p = set.problems[i];
        const bool b = i % 4 == 0;
        expected_failed += b;
        if (!b) {
            ++scored;
            expected += p.odd == ObjectLabel::A;
        }
    }
    const auto& s = r.runs.at(0);
    const bool e2e = s.failed == expected_failed && s.scored == scored && s.correct == expected;
    return {transport && repair && e2e,
            std::string("transport ") + (transport ? "ok" : "failed") + "; repair " + (repair ? "ok" : "failed") +
                "; end to end " + std::to_string(s.correct) + "/" + std::to_string(s.scored) + " correct with " +
                std::to_string(s.failed) + " failed (expected " + std::to_string(expected) + "/" +
                std::to_string(scored) + " with " + std::to_string(expected_failed) + ")"};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {1, "geometry algebra", 5, geometry_algebra},
        {2, "equivalence oracle", 30, equivalence_oracle},
        {3, "renderer determinism", 60, renderer_determinism},
        {4, "dataset audit", 0, dataset_audit},
        {5, "C1 reset_match", 300, [] { return scripted_benchmark("reset_match", "C1-reset", 1.0); }},
        {6, "C2 orbit_search", 900, [] { return scripted_benchmark("orbit_search", "C2-360hint", 0.9); }},
        {7, "session loop", 0, loop_contract},
        {8, "probe verifier", 0, probe_verifier},
        {9, "command parser", 0, parser_contract},
        {10, "mock remote agent", 0, mock_remote},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = c.limit_s <= 0 || secs <= c.limit_s;
        const bool pass = o.pass && in_time;
        failed += !pass;
        std::string timing = fmt(secs) + " s";
        if (c.limit_s > 0) timing += " of " + fmt(c.limit_s) + " s";
        std::printf("%s [%d] %s (%s): %s\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(), timing.c_str(),
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "imagery/geometry.hpp"
#include "imagery/protocol.hpp"
#include "imagery/render.hpp"

namespace imagery {

struct GenerationConstraints {
    int max_height = 2;  // Y extent
    int max_width = 5;   // X extent
    int max_depth = 5;   // Z extent
    int min_cubes = 5;
    int max_cubes = 8;

    /// Throws ConfigError when no polycube can satisfy the bounds.
    void validate() const;
    bool admits(const Polycube& p) const;
    bool operator==(const GenerationConstraints&) const = default;
};

/// Random face-connected growth, normalized. Pure function of its inputs.
Polycube generate_polycube(std::uint64_t seed, const GenerationConstraints& constraints = {});

/// Tilted three-quarter views: 30 degrees down, then one of eight headings
/// that avoid edge-on faces.
std::vector<Pose> default_pose_pool();

/// True when a single cube at `pose` shows its top and two side faces, each
/// with at least `min_fraction` of the cube's projected area.
bool pose_shows_three_faces(const Pose& pose, double min_fraction = 0.1);

struct ForgeOptions {
    GenerationConstraints constraints;
    /// Rotations used to derive matchable options. The default keeps the
    /// height axis vertical so options obey the same constraints.
    std::vector<GridRotation> option_rotations = vertical_preserving_orientations();
    std::vector<Pose> pose_pool = default_pose_pool();
    /// Minimum pixels every cube must own in its object's calibrated view.
    std::size_t min_visible_pixels = 40;
    int max_attempts = 200;
    CameraRig rig;
    RenderSettings settings;
};

struct Problem {
    std::string id;
    Polycube original{{VoxelCoord{}}};
    std::array<Polycube, 3> options{Polycube{{VoxelCoord{}}}, Polycube{{VoxelCoord{}}}, Polycube{{VoxelCoord{}}}};
    ObjectLabel odd = ObjectLabel::A;
    std::array<Pose, 4> calibrated_poses{};  // original, A, B, C
    std::string statement{kProblemStatement};

    const Polycube& object(ObjectLabel l) const;
    const Pose& pose(ObjectLabel l) const { return calibrated_poses[static_cast<std::size_t>(l)]; }
    Pose& pose(ObjectLabel l) { return calibrated_poses[static_cast<std::size_t>(l)]; }

    bool operator==(const Problem& o) const;
};

/// Exactly one option not rotation-equivalent to the original, and it is
/// the labelled odd one.
bool audit_problem(const Problem& p);

/// Throws GenerationError (with the seed) after max_attempts failures.
Problem make_problem(std::uint64_t seed, const ForgeOptions& options = {}, std::string id = {});

/// One object at its calibrated pose.
RasterImage render_object(const Problem& p, ObjectLabel l, const CameraRig& rig = {},
                          const RenderSettings& settings = {});
/// Original, A, B, C side by side with label banners.
RasterImage render_problem(const Problem& p, const CameraRig& rig = {}, const RenderSettings& settings = {});

inline constexpr int kProblemSetVersion = 1;

struct ProblemSet {
    int version = kProblemSetVersion;
    std::uint64_t seed = 0;
    GenerationConstraints constraints;
    std::vector<Problem> problems;

    const Problem& find(std::string_view id) const;  // throws ContractError
    bool operator==(const ProblemSet&) const = default;
};

ProblemSet make_problem_set(std::uint64_t seed, std::size_t count = 40, const ForgeOptions& options = {});

/// Writes manifest.json, objects/*.cells, images/*.png and poses.json.
void save_problem_set(const ProblemSet& set, const std::filesystem::path& dir, const CameraRig& rig = {},
                      const RenderSettings& settings = {});
/// Verifies every file hash and the manifest checksum. Throws LoadError
/// naming the offending file.
ProblemSet load_problem_set(const std::filesystem::path& dir);

/// Rewrites one problem's images, poses.json and the manifest after its
/// calibrated poses changed. Each file is replaced atomically.
void update_problem_poses(const ProblemSet& set, const std::string& problem_id, const std::filesystem::path& dir,
                          const CameraRig& rig = {}, const RenderSettings& settings = {});

std::string sha256_hex(std::span<const std::uint8_t> bytes);

/// SHA-256 over seed, ids, cells, odd labels and poses. Independent of
/// rendering, so a saved and reloaded set keep the same value.
std::string problem_set_checksum(const ProblemSet& set);

struct ProbePair {
    Polycube object{{VoxelCoord{}}};
    Pose base_pose;
    RotationCommand applied;
    RasterImage before{1, 1};
    RasterImage after{1, 1};

    std::string ground_truth() const { return format_command(applied); }
};

ProbePair make_probe_pair(const Polycube& object, const RotationCommand& applied, const Pose& base_pose,
                          const CameraRig& rig = {}, const RenderSettings& settings = {});

struct SweepSpec {
    std::vector<Direction> axes{Direction::right, Direction::up, Direction::cw};
    double start_deg = 0;
    double end_deg = 360;  // exclusive
    double step_deg = 30;

    void validate() const;  // ConfigError unless step > 0 divides the range
    std::vector<double> angles() const;
};

/// One pair per (axis, angle), axes outermost.
std::vector<ProbePair> make_sweep_dataset(const Polycube& object, const Pose& base_pose, const SweepSpec& spec = {},
                                          const CameraRig& rig = {}, const RenderSettings& settings = {});

struct GenerationProbe {
    RasterImage input{1, 1};
    std::string instruction;
    RasterImage ground_truth{1, 1};
    RotationCommand command;
};

GenerationProbe make_generation_probe(const Polycube& object, const Pose& base_pose, const RotationCommand& command,
                                      const CameraRig& rig = {}, const RenderSettings& settings = {});

/// Writes probes.json plus before/after PNGs for a list of pairs.
void save_probe_pairs(const std::vector<ProbePair>& pairs, const std::filesystem::path& dir);
std::vector<ProbePair> load_probe_pairs(const std::filesystem::path& dir);

}  // namespace imagery

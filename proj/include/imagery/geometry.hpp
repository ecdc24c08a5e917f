#pragma once

#include <array>
#include <compare>
#include <string>
#include <string_view>
#include <vector>

#include "imagery/command.hpp"
#include "imagery/math.hpp"

namespace imagery {

/// Tolerance on 1 - |<q1,q2>| under which two orientations are equal.
inline constexpr double kOrientationTolerance = 1e-9;

/// Orientation of an object relative to the fixed camera rig. The camera
/// sits on +Z looking at the origin with +Y up; q and -q are the same pose.
struct Pose {
    Quat orientation = Quat::identity();

    static Pose identity() { return {}; }
    Mat3 matrix() const { return orientation.to_matrix(); }
};

bool same_orientation(const Pose& a, const Pose& b, double tolerance = kOrientationTolerance);

/// Rotation matrix of a single camera-space command. `reset` has no matrix
/// of its own and yields the identity.
Mat3 command_matrix(const RotationCommand& cmd);
Quat command_quat(const RotationCommand& cmd);

/// Rotates `pose` about a camera-fixed axis:
///   right:+t -> +t about +Y, left:+t -> -t about +Y
///   down:+t  -> +t about +X, up:+t   -> -t about +X
///   rotate:ccw:+t -> +t about +Z, rotate:cw:+t -> -t about +Z
/// The rotation pre-multiplies the current orientation. `reset` returns the
/// canonical build pose (identity).
Pose apply_camera_rotation(const Pose& pose, const RotationCommand& cmd);

/// Pitch about X, yaw about Y, roll about Z, in degrees. Applied
/// extrinsically in that order: R = Rz(roll) * Ry(yaw) * Rx(pitch).
struct EulerAnglesDeg {
    double pitch = 0, yaw = 0, roll = 0;
};

Pose pose_from_euler(const EulerAnglesDeg& e);
/// Inverse of pose_from_euler. Yaw lands in [-90, 90]; at |yaw| = 90 the
/// roll is pinned to 0 and the remaining rotation is folded into pitch.
EulerAnglesDeg pose_to_euler(const Pose& p);

struct VoxelCoord {
    int x = 0, y = 0, z = 0;
    auto operator<=>(const VoxelCoord&) const = default;
};

/// One of the 24 proper rotations of the cubic grid, as an integer matrix.
struct GridRotation {
    std::array<std::array<int, 3>, 3> m{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

    static GridRotation identity() { return {}; }
    VoxelCoord apply(const VoxelCoord& v) const;
    GridRotation operator*(const GridRotation& o) const;
    GridRotation inverse() const;  // transpose
    Mat3 matrix() const;
    Quat quat() const { return Quat::from_matrix(matrix()); }
    /// Smallest k >= 1 with r^k = identity.
    int order() const;
    auto operator<=>(const GridRotation&) const = default;
};

/// The rotation group of the cube, generated from quarter turns about X, Y
/// and Z. Deterministic order; identity first.
const std::vector<GridRotation>& canonical_orientations();

/// The 8 grid rotations that map the vertical axis to +Y or -Y. These keep
/// an object's height unchanged.
const std::vector<GridRotation>& vertical_preserving_orientations();

/// A non-empty, face-connected set of unit cubes. Cells are kept sorted and
/// unique; construction from an invalid set throws ContractError.
class Polycube {
public:
    explicit Polycube(std::vector<VoxelCoord> cells);

    const std::vector<VoxelCoord>& cells() const noexcept { return cells_; }
    std::size_t size() const noexcept { return cells_.size(); }

    VoxelCoord min_corner() const;
    VoxelCoord max_corner() const;
    /// Extent along each axis in cells (x = width, y = height, z = depth).
    VoxelCoord extent() const;

    bool operator==(const Polycube&) const = default;

private:
    std::vector<VoxelCoord> cells_;
};

bool is_face_connected(const std::vector<VoxelCoord>& cells);

/// Translates so the min corner is (0,0,0); cells in lexicographic order.
Polycube normalize(const Polycube& p);
Polycube rotate(const Polycube& p, const GridRotation& r);
bool rotation_equivalent(const Polycube& a, const Polycube& b);
/// Reflection across an X = const plane, normalized.
Polycube mirror(const Polycube& p);
bool is_chiral(const Polycube& p);

/// Canonical text form: one "x,y,z" line per cell in lexicographic order.
std::string to_text(const Polycube& p);
Polycube polycube_from_text(std::string_view text);

}  // namespace imagery

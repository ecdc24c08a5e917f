#include "imagery/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <set>

#include "imagery/error.hpp"

namespace imagery {

bool same_orientation(const Pose& a, const Pose& b, double tolerance) {
    const double d = std::abs(a.orientation.normalized().dot(b.orientation.normalized()));
    return d >= 1.0 - tolerance;
}

Quat command_quat(const RotationCommand& cmd) {
    static constexpr Vec3 kX{1, 0, 0}, kY{0, 1, 0}, kZ{0, 0, 1};
    const double t = deg_to_rad(cmd.angle);
    switch (cmd.direction) {
        case Direction::right: return Quat::from_axis_angle(kY, t);
        case Direction::left: return Quat::from_axis_angle(kY, -t);
        case Direction::down: return Quat::from_axis_angle(kX, t);
        case Direction::up: return Quat::from_axis_angle(kX, -t);
        case Direction::ccw: return Quat::from_axis_angle(kZ, t);
        case Direction::cw: return Quat::from_axis_angle(kZ, -t);
        case Direction::reset: return Quat::identity();
    }
    return Quat::identity();
}

Mat3 command_matrix(const RotationCommand& cmd) { return command_quat(cmd).to_matrix(); }

Pose apply_camera_rotation(const Pose& pose, const RotationCommand& cmd) {
    if (cmd.direction == Direction::reset) return Pose::identity();
    return {(command_quat(cmd) * pose.orientation).normalized()};
}

Pose pose_from_euler(const EulerAnglesDeg& e) {
    const Quat qx = Quat::from_axis_angle({1, 0, 0}, deg_to_rad(e.pitch));
    const Quat qy = Quat::from_axis_angle({0, 1, 0}, deg_to_rad(e.yaw));
    const Quat qz = Quat::from_axis_angle({0, 0, 1}, deg_to_rad(e.roll));
    return {(qz * qy * qx).normalized()};
}

EulerAnglesDeg pose_to_euler(const Pose& p) {
    const auto& m = p.orientation.normalized().to_matrix().m;
    const double cos_yaw = std::hypot(m[0][0], m[1][0]);
    EulerAnglesDeg e;
    if (cos_yaw > 1e-7) {
        e.yaw = std::atan2(-m[2][0], cos_yaw);
        e.pitch = std::atan2(m[2][1], m[2][2]);
        e.roll = std::atan2(m[1][0], m[0][0]);
    } else {
        // Gimbal lock: R = Ry(+-90) * Rx(pitch) once roll is pinned to 0.
        e.yaw = m[2][0] < 0 ? std::numbers::pi / 2 : -std::numbers::pi / 2;
        e.pitch = std::atan2(-m[1][2], m[1][1]);
        e.roll = 0;
    }
    e.pitch = rad_to_deg(e.pitch);
    e.yaw = rad_to_deg(e.yaw);
    e.roll = rad_to_deg(e.roll);
    return e;
}

VoxelCoord GridRotation::apply(const VoxelCoord& v) const {
    return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
}

GridRotation GridRotation::operator*(const GridRotation& o) const {
    GridRotation r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            r.m[i][j] = m[i][0] * o.m[0][j] + m[i][1] * o.m[1][j] + m[i][2] * o.m[2][j];
    return r;
}

GridRotation GridRotation::inverse() const {
    GridRotation r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r.m[i][j] = m[j][i];
    return r;
}

Mat3 GridRotation::matrix() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r.m[i][j] = m[i][j];
    return r;
}

int GridRotation::order() const {
    GridRotation acc = *this;
    int k = 1;
    while (acc != identity()) {
        acc = acc * *this;
        ++k;
    }
    return k;
}

const std::vector<GridRotation>& canonical_orientations() {
    static const std::vector<GridRotation> group = [] {
        const GridRotation rx{{{{1, 0, 0}, {0, 0, -1}, {0, 1, 0}}}};
        const GridRotation ry{{{{0, 0, 1}, {0, 1, 0}, {-1, 0, 0}}}};
        const GridRotation rz{{{{0, -1, 0}, {1, 0, 0}, {0, 0, 1}}}};
        std::vector<GridRotation> out{GridRotation::identity()};
        std::set<GridRotation> seen(out.begin(), out.end());
        std::deque<GridRotation> frontier(out.begin(), out.end());
        while (!frontier.empty()) {
            const GridRotation g = frontier.front();
            frontier.pop_front();
            for (const auto& gen : {rx, ry, rz}) {
                const GridRotation next = gen * g;
                if (seen.insert(next).second) {
                    out.push_back(next);
                    frontier.push_back(next);
                }
            }
        }
        return out;
    }();
    return group;
}

const std::vector<GridRotation>& vertical_preserving_orientations() {
    static const std::vector<GridRotation> subgroup = [] {
        std::vector<GridRotation> out;
        for (const auto& g : canonical_orientations())
            if (std::abs(g.m[1][1]) == 1) out.push_back(g);
        return out;
    }();
    return subgroup;
}

bool is_face_connected(const std::vector<VoxelCoord>& cells) {
    if (cells.empty()) return false;
    const std::set<VoxelCoord> all(cells.begin(), cells.end());
    std::set<VoxelCoord> seen{cells.front()};
    std::vector<VoxelCoord> stack{cells.front()};
    static constexpr int kSteps[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    while (!stack.empty()) {
        const VoxelCoord c = stack.back();
        stack.pop_back();
        for (const auto& s : kSteps) {
            const VoxelCoord n{c.x + s[0], c.y + s[1], c.z + s[2]};
            if (all.contains(n) && seen.insert(n).second) stack.push_back(n);
        }
    }
    return seen.size() == all.size();
}

Polycube::Polycube(std::vector<VoxelCoord> cells) : cells_(std::move(cells)) {
    std::sort(cells_.begin(), cells_.end());
    cells_.erase(std::unique(cells_.begin(), cells_.end()), cells_.end());
    if (cells_.empty()) throw ContractError("polycube must contain at least one cell");
    if (!is_face_connected(cells_)) throw ContractError("polycube cells are not face-connected");
}

VoxelCoord Polycube::min_corner() const {
    VoxelCoord lo = cells_.front();
    for (const auto& c : cells_) lo = {std::min(lo.x, c.x), std::min(lo.y, c.y), std::min(lo.z, c.z)};
    return lo;
}

VoxelCoord Polycube::max_corner() const {
    VoxelCoord hi = cells_.front();
    for (const auto& c : cells_) hi = {std::max(hi.x, c.x), std::max(hi.y, c.y), std::max(hi.z, c.z)};
    return hi;
}

VoxelCoord Polycube::extent() const {
    const auto lo = min_corner();
    const auto hi = max_corner();
    return {hi.x - lo.x + 1, hi.y - lo.y + 1, hi.z - lo.z + 1};
}

Polycube normalize(const Polycube& p) {
    const VoxelCoord lo = p.min_corner();
    std::vector<VoxelCoord> out;
    out.reserve(p.size());
    for (const auto& c : p.cells()) out.push_back({c.x - lo.x, c.y - lo.y, c.z - lo.z});
    return Polycube(std::move(out));
}

Polycube rotate(const Polycube& p, const GridRotation& r) {
    std::vector<VoxelCoord> out;
    out.reserve(p.size());
    for (const auto& c : p.cells()) out.push_back(r.apply(c));
    return Polycube(std::move(out));
}

bool rotation_equivalent(const Polycube& a, const Polycube& b) {
    if (a.size() != b.size()) return false;
    const Polycube target = normalize(b);
    for (const auto& r : canonical_orientations())
        if (normalize(rotate(a, r)) == target) return true;
    return false;
}

Polycube mirror(const Polycube& p) {
    std::vector<VoxelCoord> out;
    out.reserve(p.size());
    for (const auto& c : p.cells()) out.push_back({-c.x, c.y, c.z});
    return normalize(Polycube(std::move(out)));
}

bool is_chiral(const Polycube& p) { return !rotation_equivalent(p, mirror(p)); }

std::string to_text(const Polycube& p) {
    std::string out;
    for (const auto& c : p.cells()) {
        out += std::to_string(c.x) + "," + std::to_string(c.y) + "," + std::to_string(c.z) + "\n";
    }
    return out;
}

Polycube polycube_from_text(std::string_view text) {
    std::vector<VoxelCoord> cells;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
        if (line.empty()) continue;
        int v[3];
        const char* ptr = line.data();
        const char* end = line.data() + line.size();
        for (int i = 0; i < 3; ++i) {
            const auto res = std::from_chars(ptr, end, v[i]);
            if (res.ec != std::errc()) throw DecodeError("bad cell on line " + std::to_string(line_no));
            ptr = res.ptr;
            if (i < 2) {
                if (ptr == end || *ptr != ',') throw DecodeError("bad cell on line " + std::to_string(line_no));
                ++ptr;
            }
        }
        if (ptr != end) throw DecodeError("trailing data on line " + std::to_string(line_no));
        cells.push_back({v[0], v[1], v[2]});
    }
    return Polycube(std::move(cells));
}

}  // namespace imagery

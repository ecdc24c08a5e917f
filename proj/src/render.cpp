#include "imagery/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "imagery/error.hpp"

namespace imagery {

void CameraRig::validate() const {
    if (!(distance_factor > 0)) throw ContractError("camera distance must be positive");
    if (!(vertical_fov_deg >= 10.0 && vertical_fov_deg <= 90.0))
        throw ContractError("vertical field of view must lie in [10, 90] degrees");
}

namespace {

constexpr double kSnap = 16777216.0;  // 2^24

double snap(double v) { return std::nearbyint(v * kSnap) / kSnap; }

Vec3 snap(const Vec3& v) { return {snap(v.x), snap(v.y), snap(v.z)}; }

enum class Shade { top, right, front };

// Prefers Y, then X, then Z when two components tie, so near-diagonal
// normals shade the same way regardless of rounding.
Shade classify(const Vec3& n) {
    const double ax = std::abs(n.x), ay = std::abs(n.y), az = std::abs(n.z);
    constexpr double eps = 1e-9;
    if (ay + eps >= ax && ay + eps >= az) return Shade::top;
    if (ax + eps >= az) return Shade::right;
    return Shade::front;
}

struct Face {
    std::array<Vec3, 4> world;
    Vec3 normal;
    Shade shade;
    std::size_t cell;
    int side;
};

struct ScreenPoint {
    double x, y;
};

double edge(const ScreenPoint& a, const ScreenPoint& b, double px, double py) {
    return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
}

// Corner offsets of each face in CCW order seen from outside, with normal.
struct FaceTemplate {
    int normal[3];
    int corners[4][3];
};

constexpr FaceTemplate kFaces[6] = {
    {{1, 0, 0}, {{1, 0, 0}, {1, 1, 0}, {1, 1, 1}, {1, 0, 1}}},
    {{-1, 0, 0}, {{0, 0, 0}, {0, 0, 1}, {0, 1, 1}, {0, 1, 0}}},
    {{0, 1, 0}, {{0, 1, 0}, {0, 1, 1}, {1, 1, 1}, {1, 1, 0}}},
    {{0, -1, 0}, {{0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1}}},
    {{0, 0, 1}, {{0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}}},
    {{0, 0, -1}, {{0, 0, 0}, {0, 1, 0}, {1, 1, 0}, {1, 0, 0}}},
};


struct Raster {
    std::vector<Face> faces;
    std::vector<int> owner;  // face index per pixel, -1 for background
};

Raster rasterize(const Polycube& object, const Pose& pose, const CameraRig& rig, const RenderSettings& settings) {
    rig.validate();
    if (settings.width <= 0 || settings.height <= 0) throw ContractError("render resolution must be positive");
    const VoxelCoord ext = object.extent();
    if (ext.x > kMaxRenderExtent || ext.y > kMaxRenderExtent || ext.z > kMaxRenderExtent)
        throw SizeError("object exceeds " + std::to_string(kMaxRenderExtent) + " cells per axis");

    // Work in exact integers scaled by 2n: corner - centroid = (2n*corner - 2*sum - n) / 2n.
    const long long n = static_cast<long long>(object.size());
    long long sx = 0, sy = 0, sz = 0;
    for (const auto& c : object.cells()) sx += c.x, sy += c.y, sz += c.z;
    const double scale = 1.0 / static_cast<double>(2 * n);
    auto offset = [&](int x, int y, int z) {
        return std::array<long long, 3>{2 * n * x - 2 * sx - n, 2 * n * y - 2 * sy - n, 2 * n * z - 2 * sz - n};
    };

    long long max_r2 = 0;
    for (const auto& c : object.cells())
        for (int dx = 0; dx <= 1; ++dx)
            for (int dy = 0; dy <= 1; ++dy)
                for (int dz = 0; dz <= 1; ++dz) {
                    const auto o = offset(c.x + dx, c.y + dy, c.z + dz);
                    max_r2 = std::max(max_r2, o[0] * o[0] + o[1] * o[1] + o[2] * o[2]);
                }
    const double radius = std::sqrt(static_cast<double>(max_r2)) * scale;
    const double eye = rig.distance_factor * radius;
    const Vec3 camera{0, 0, eye};

    const Mat3 rot = pose.orientation.normalized().to_matrix();
    const std::set<VoxelCoord> occupied(object.cells().begin(), object.cells().end());

    std::vector<Face> faces;
    for (std::size_t ci = 0; ci < object.size(); ++ci) {
        const VoxelCoord& c = object.cells()[ci];
        for (int side = 0; side < 6; ++side) {
            const FaceTemplate& tpl = kFaces[side];
            if (occupied.contains({c.x + tpl.normal[0], c.y + tpl.normal[1], c.z + tpl.normal[2]})) continue;
            Face f;
            for (int k = 0; k < 4; ++k) {
                const auto o = offset(c.x + tpl.corners[k][0], c.y + tpl.corners[k][1], c.z + tpl.corners[k][2]);
                const Vec3 local{static_cast<double>(o[0]) * scale, static_cast<double>(o[1]) * scale,
                                 static_cast<double>(o[2]) * scale};
                f.world[k] = snap(rot * local);
            }
            f.normal = snap(rot * Vec3{double(tpl.normal[0]), double(tpl.normal[1]), double(tpl.normal[2])});
            const Vec3 center = (f.world[0] + f.world[1] + f.world[2] + f.world[3]) * 0.25;
            if ((camera - center).dot(f.normal) <= 0) continue;
            bool in_front = true;
            for (const auto& v : f.world) in_front = in_front && (eye - v.z) > 1e-6;
            if (!in_front) continue;
            f.shade = classify(f.normal);
            f.cell = ci;
            f.side = side;
            faces.push_back(f);
        }
    }

    const int width = settings.width, height = settings.height;
    const double focal = (height * 0.5) / std::tan(deg_to_rad(rig.vertical_fov_deg) * 0.5);
    const std::size_t npx = static_cast<std::size_t>(width) * height;
    std::vector<double> depth(npx, std::numeric_limits<double>::infinity());
    std::vector<int> owner(npx, -1);

    for (std::size_t fi = 0; fi < faces.size(); ++fi) {
        const Face& f = faces[fi];
        std::array<ScreenPoint, 4> s;
        double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
        for (int k = 0; k < 4; ++k) {
            const double zv = eye - f.world[k].z;
            s[k] = {width * 0.5 + focal * f.world[k].x / zv, height * 0.5 - focal * f.world[k].y / zv};
            min_x = std::min(min_x, s[k].x), max_x = std::max(max_x, s[k].x);
            min_y = std::min(min_y, s[k].y), max_y = std::max(max_y, s[k].y);
        }
        const int x0 = std::max(0, static_cast<int>(std::floor(min_x - 0.5)));
        const int x1 = std::min(width - 1, static_cast<int>(std::ceil(max_x + 0.5)));
        const int y0 = std::max(0, static_cast<int>(std::floor(min_y - 0.5)));
        const int y1 = std::min(height - 1, static_cast<int>(std::ceil(max_y + 0.5)));
        const double plane = f.normal.dot(f.world[0] - camera);

        for (int py = y0; py <= y1; ++py) {
            const double cy = py + 0.5;
            for (int px = x0; px <= x1; ++px) {
                const double cx = px + 0.5;
                bool pos = true, neg = true;
                for (int k = 0; k < 4; ++k) {
                    const double e = edge(s[k], s[(k + 1) % 4], cx, cy);
                    pos = pos && e >= 0;
                    neg = neg && e <= 0;
                }
                if (!pos && !neg) continue;
                const Vec3 ray{(cx - width * 0.5) / focal, (height * 0.5 - cy) / focal, -1.0};
                const double denom = f.normal.dot(ray);
                if (denom == 0) continue;
                const double t = plane / denom;
                const std::size_t idx = static_cast<std::size_t>(py) * width + px;
                if (t < depth[idx]) {
                    depth[idx] = t;
                    owner[idx] = static_cast<int>(fi);
                }
            }
        }
    }

    return {std::move(faces), std::move(owner)};
}

}  // namespace

RasterImage render(const Polycube& object, const Pose& pose, const CameraRig& rig, const RenderSettings& settings) {
    const auto [faces, owner] = rasterize(object, pose, rig, settings);
    const int width = settings.width, height = settings.height;
    RasterImage img(width, height, settings.background);
    for (int py = 0; py < height; ++py) {
        for (int px = 0; px < width; ++px) {
            const int id = owner[static_cast<std::size_t>(py) * width + px];
            if (id < 0) continue;
            Rgb color;
            switch (faces[id].shade) {
                case Shade::top: color = settings.top; break;
                case Shade::right: color = settings.right; break;
                case Shade::front: color = settings.front; break;
            }
            if (settings.draw_edges) {
                auto differs = [&](int x, int y) {
                    if (x < 0 || y < 0 || x >= width || y >= height) return true;
                    return owner[static_cast<std::size_t>(y) * width + x] != id;
                };
                if (differs(px - 1, py) || differs(px + 1, py) || differs(px, py - 1) || differs(px, py + 1))
                    color = settings.edge;
            }
            img.set(px, py, color);
        }
    }
    return img;
}

std::vector<FaceVisibility> visible_faces(const Polycube& object, const Pose& pose, const CameraRig& rig,
                                          const RenderSettings& settings) {
    const auto [faces, owner] = rasterize(object, pose, rig, settings);
    std::vector<std::size_t> counts(faces.size(), 0);
    for (int id : owner)
        if (id >= 0) ++counts[static_cast<std::size_t>(id)];
    std::vector<FaceVisibility> out;
    for (std::size_t i = 0; i < faces.size(); ++i)
        if (counts[i] > 0) out.push_back({faces[i].cell, faces[i].side, counts[i]});
    return out;
}

}  // namespace imagery

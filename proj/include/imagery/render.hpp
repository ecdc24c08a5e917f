#pragma once

#include "imagery/geometry.hpp"
#include "imagery/image.hpp"

namespace imagery {

/// Fixed camera: on +Z looking at the origin, +Y up.
struct CameraRig {
    /// Eye distance as a multiple of the object's bounding radius.
    double distance_factor = 3.5;
    double vertical_fov_deg = 30.0;

    void validate() const;
};

struct RenderSettings {
    int width = 256;
    int height = 256;
    Rgb background{255, 255, 255};
    // Shade by the dominant world axis of the face normal.
    Rgb top{214, 224, 240};    // +-Y
    Rgb right{140, 160, 200};  // +-X
    Rgb front{78, 96, 140};    // +-Z
    Rgb edge{0, 0, 0};
    bool draw_edges = true;
};

/// Largest extent (cells per axis) the renderer accepts.
inline constexpr int kMaxRenderExtent = 64;

/// Perspective render of `object` centered on its centroid and oriented by
/// `pose`. Exposed cube faces are back-face culled and depth tested per
/// pixel; no anti-aliasing. World-space vertices are snapped to a 2^-24
/// grid before projection so that equal orientations reached through
/// different floating-point paths produce identical bytes.
RasterImage render(const Polycube& object, const Pose& pose, const CameraRig& rig = {},
                   const RenderSettings& settings = {});

struct FaceVisibility {
    std::size_t cell;    // index into object.cells()
    int side;            // 0..5: +X, -X, +Y, -Y, +Z, -Z in object space
    std::size_t pixels;  // pixels this face owns after depth testing
};

/// Faces that own at least one pixel in the render with the same arguments.
std::vector<FaceVisibility> visible_faces(const Polycube& object, const Pose& pose, const CameraRig& rig = {},
                                          const RenderSettings& settings = {});

}  // namespace imagery

#pragma once

#include "anchorpano/core.hpp"
#include "anchorpano/erp_geometry.hpp"
#include "anchorpano/pano_selection.hpp"
#include "anchorpano/planes.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace anchorpano {

/// Axis-aligned rectangle lying on one plane of the room.
struct Surface {
    int plane_id = 0;
    int axis = 0;           // the plane is {x : x[axis] = position}
    double position = 0.0;
    Vec3 lo = Vec3::Zero();  // extent on the two in-plane axes (lo/hi[axis] ignored)
    Vec3 hi = Vec3::Zero();
};

struct SurfaceMaterial {
    std::array<float, 3> color{0.5f, 0.5f, 0.5f};
    double checker_size = 0.25;
};

enum class RoomShape { box, l_shape };

/// Ground-truth room. y is up; floors face (0,1,0), ceilings (0,-1,0), and
/// every layout normal points into the room.
struct SyntheticRoom {
    RoomShape shape = RoomShape::box;
    Vec3 dims = Vec3::Ones();  // full extents along x, y, z, centered on the origin
    double cut_w = 0.0;         // L-shape: removed block at the (+x, +z) corner
    double cut_d = 0.0;
    std::vector<Plane> planes;
    std::vector<Surface> surfaces;
    std::vector<SurfaceMaterial> materials;  // parallel to planes

    Bounds3 bounds() const { return {-0.5 * dims, 0.5 * dims}; }
    double diagonal() const { return dims.norm(); }
    /// Strictly inside the room volume.
    bool contains(const Vec3& p) const;
    const SurfaceMaterial& material(int plane_id) const;
};

SyntheticRoom make_box_room(double w, double h, double d, std::uint64_t seed);
SyntheticRoom make_l_room(double w, double h, double d, double cut_w, double cut_d, std::uint64_t seed);

/// Adds a horizontal non-layout rectangle (table top) and returns its plane id.
int add_tabletop(SyntheticRoom& room, double x0, double x1, double z0, double z1, double height);

/// Rectangle in ERP parameter space: longitude theta in [-pi, pi], latitude
/// phi in [-pi/2, pi/2] (phi > 0 is up).
struct HoleRect {
    double lon_min = 0.0, lon_max = 0.0;
    double lat_min = 0.0, lat_max = 0.0;
};

struct HoleSpec {
    std::vector<HoleRect> rects;

    /// Non-overlapping random rectangles, each side at most max_side_fraction of the range.
    static HoleSpec random_patches(int count, double max_side_fraction, std::uint64_t seed);
    /// Fraction of the ERP parameter domain covered; rectangles are assumed disjoint.
    double area_fraction() const;
    bool covers(double lon, double lat) const;
};

struct ErpRender {
    Image image;           // RGBA, alpha 0 inside holes
    DepthMap depth;        // ray distance to the visible surface, every pixel
    PlaneIdMap plane_ids;  // visible surface plane, every pixel
    Mask holes;
};

/// Analytic ray tracer over the room's bounded surfaces. Throws DataError
/// when the camera is outside the room.
ErpRender render_erp(const SyntheticRoom& room, const CameraPose& pose, int H, int W, const HoleSpec& holes = {});

struct CubemapRender {
    CubemapFaceSet faces;
    std::array<PlaneIdMap, 6> plane_ids;
};

CubemapRender render_cubemap(const SyntheticRoom& room, const CameraPose& pose, int face_resolution);

/// Nearest positive hit among the unbounded layout planes for the ray
/// through each hole token's patch-center pixel (closed-form axis-aligned
/// intersection). Indexed by token; absent for observed tokens and rays that
/// hit nothing.
std::vector<std::optional<int>> ground_truth_assignment(const SyntheticRoom& room, const CameraPose& pose, int rows,
                                                        int cols, int patch, const std::vector<bool>& hole_tokens);

/// Seeded room for test sweeps: even seeds give boxes, odd seeds L-shapes,
/// unless a shape is forced.
SyntheticRoom make_seeded_room(std::uint64_t seed, std::optional<RoomShape> shape = std::nullopt);
/// A camera position strictly inside the room, away from walls.
CameraPose seeded_interior_pose(const SyntheticRoom& room, std::uint64_t seed);

}  // namespace anchorpano

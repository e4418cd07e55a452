#pragma once

#include "anchorpano/core.hpp"
#include "anchorpano/erp_geometry.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace anchorpano {

enum class PlaneLabel { layout, non_layout, unknown };

const char* to_string(PlaneLabel l);
PlaneLabel plane_label_from_string(std::string_view s);

/// Plane n.x + offset = 0 with unit normal.
struct Plane {
    int id = 0;
    Vec3 normal = Vec3::UnitZ();
    double offset = 0.0;
    PlaneLabel label = PlaneLabel::unknown;
    std::optional<std::string> semantic;

    double signed_distance(const Vec3& x) const { return normal.dot(x) + offset; }
    bool is_layout() const { return label == PlaneLabel::layout; }
};

/// Throws DataError on non-unit normals or duplicate ids.
void validate_planes(std::span<const Plane> planes);

const Plane* find_plane(std::span<const Plane> planes, int id);

struct PointCloud {
    std::vector<Vec3> points;
    std::vector<int> source_view;  // optional, empty or one per point
};

struct IntersectionResult {
    int plane_id = 0;
    double distance = 0.0;
    Vec3 hit = Vec3::Zero();
};

inline constexpr double kParallelEpsilon = 1e-8;

/// Distance along d to the plane, absent when parallel or behind the origin.
std::optional<double> ray_plane_distance(const Vec3& o, const Vec3& d, const Plane& plane);

struct NearestHits {
    IntersectionResult best;
    std::optional<IntersectionResult> second;
};

/// Two nearest layout-plane hits in front of the origin. Equal distances
/// resolve to the lower plane id.
std::optional<NearestHits> nearest_layout_plane(const Vec3& o, const Vec3& d, std::span<const Plane> planes);

struct RansacOptions {
    int iterations = 1000;
    double inlier_threshold = 0.01;
    std::uint64_t seed = 0;
};

struct RansacResult {
    Plane plane;
    std::vector<std::size_t> inliers;
};

/// Three-point RANSAC followed by a least-squares refit on the inliers. The
/// refit normal is oriented toward the world origin (offset >= 0).
/// Throws DataError when fewer than 3 points are given or every sampled
/// triple is collinear.
RansacResult fit_plane_ransac(const PointCloud& cloud, const RansacOptions& opts);

/// Least-squares plane through the points (smallest covariance eigenvector).
Plane fit_plane_least_squares(std::span<const Vec3> points);

struct MergeOptions {
    double angle_tol_deg = 5.0;
    double offset_tol = 0.05;
};

/// Groups planes whose normals and offsets agree within tolerance
/// (transitively) and replaces each group with a weighted average plane.
/// `weights` is typically inlier count; empty means unit weights. The result
/// is sorted by id and each merged plane keeps the smallest member id.
std::vector<Plane> merge_planes(std::span<const Plane> planes, const MergeOptions& opts = {},
                                std::span<const double> weights = {});

struct RefinedDepth {
    DepthMap depth;
    Mask failed;  // layout pixel whose ray missed its plane
    std::size_t replaced = 0;
    std::size_t failed_count = 0;
};

/// Replaces ERP depth on layout-plane pixels with the ray-plane distance.
RefinedDepth refine_depth(const DepthMap& depth, const PlaneIdMap& plane_ids, const CameraPose& pose,
                          std::span<const Plane> planes);

}  // namespace anchorpano

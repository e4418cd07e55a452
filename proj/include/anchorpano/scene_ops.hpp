#pragma once

#include "anchorpano/core.hpp"
#include "anchorpano/erp_geometry.hpp"
#include "anchorpano/pano_selection.hpp"
#include "anchorpano/plane_classifier.hpp"
#include "anchorpano/planes.hpp"

#include <span>
#include <vector>

namespace anchorpano {

// Glue between the per-module primitives: turning depth panoramas into point
// clouds, pulling several planes out of one cloud, and labelling pixels.

/// World points for every stride-th pixel with positive finite depth,
/// skipping masked pixels when a mask is given.
PointCloud backproject(const DepthMap& depth, const CameraPose& pose, const Mask* skip = nullptr, int stride = 1);

struct ExtractOptions {
    int max_planes = 12;
    std::size_t min_inliers = 200;
    RansacOptions ransac;
    MergeOptions merge;
};

struct ExtractedPlanes {
    std::vector<Plane> planes;        // sorted by id, labels unknown
    std::vector<std::size_t> support;  // points within the inlier threshold, per plane
};

/// Sequential RANSAC: fit, remove inliers, repeat until the best plane has
/// fewer than min_inliers points; then merge near-duplicates.
ExtractedPlanes extract_planes(const PointCloud& cloud, const ExtractOptions& opts);

/// Largest in-plane side of the bounding rectangle of the points within tol.
double plane_extent(const Plane& plane, std::span<const Vec3> points, double tol);

/// Heuristic labels for every plane (see heuristic_classify). Of several
/// floor-like planes only the lowest stays a floor, and likewise only the
/// highest ceiling-like plane; the rest become tables.
void label_planes_heuristically(std::vector<Plane>& planes, std::span<const Vec3> points,
                                std::span<const double> camera_heights, const Vec3& up, double tol,
                                const HeuristicOptions& opts = {});

/// Per pixel, the closest layout plane to the back-projected point if it is
/// within tol; kNoPlane otherwise and on skipped pixels.
PlaneIdMap label_pixels(const DepthMap& depth, const CameraPose& pose, std::span<const Plane> planes, double tol,
                        const Mask* skip = nullptr);

/// Pixels whose visible surface point falls in an unobserved voxel (or
/// outside the grid, or has no depth).
Mask unobserved_mask(const DepthMap& depth, const CameraPose& pose, const VoxelVisibilityGrid& grid);

/// Diagonal of the axis-aligned bounding box of the points.
double bounding_diagonal(std::span<const Vec3> points);

/// Per-pixel plane-id mask for one plane.
Mask plane_mask(const PlaneIdMap& ids, int plane_id);

}  // namespace anchorpano

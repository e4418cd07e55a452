#pragma once

#include "anchorpano/core.hpp"
#include "anchorpano/erp_geometry.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace anchorpano {

struct Bounds3 {
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Ones();

    Bounds3 inflated(double fraction) const;
    bool contains(const Vec3& p) const;
};

/// Axis-aligned occupancy grid of voxels already covered by input views.
struct VoxelVisibilityGrid {
    Bounds3 bounds;
    std::array<int, 3> resolution{64, 64, 64};
    std::vector<std::uint8_t> observed;

    VoxelVisibilityGrid() = default;
    VoxelVisibilityGrid(const Bounds3& b, std::array<int, 3> res);

    std::size_t voxel_count() const { return observed.size(); }
    std::size_t linear(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * resolution[1] + y) * resolution[0] + x;
    }
    Vec3 voxel_size() const;
    /// Voxel containing p, absent outside the bounds.
    std::optional<std::array<int, 3>> locate(const Vec3& p) const;
    bool is_observed(int x, int y, int z) const { return observed[linear(x, y, z)] != 0; }
    std::size_t observed_count() const;
};

/// ERP depth map (distance along the unit ray) with its pose. Non-positive or
/// non-finite depths are ignored.
struct DepthView {
    DepthMap depth;
    CameraPose pose;
};

/// Marks every voxel containing a back-projected depth sample.
VoxelVisibilityGrid build_visibility_grid(std::span<const DepthView> views, const Bounds3& bounds,
                                          std::array<int, 3> resolution);

/// Adds one view's samples to an existing grid; never clears a voxel.
void add_view(VoxelVisibilityGrid& grid, const DepthView& view);

struct VoxelCountOptions {
    double max_range = 1e9;
    int stride = 1;  // sample every stride-th hole pixel per axis
};

/// Distinct unobserved voxels traversed by rays through hole pixels, each ray
/// stopping at the first observed voxel, the grid boundary, or max_range.
/// Traversal is exact (voxel-by-voxel DDA).
std::size_t count_new_voxels(const CameraPose& pose, const Mask& hole_mask, const VoxelVisibilityGrid& grid,
                             const VoxelCountOptions& opts = {});

/// Voxels visited by one ray over [0, max_range], stopping after the first
/// observed voxel (which is not reported).
std::vector<std::array<int, 3>> traverse_unobserved(const VoxelVisibilityGrid& grid, const Vec3& origin,
                                                    const Vec3& dir, double max_range);

struct ScoreParams {
    double h_star = 0.4;
    double sigma_h = 0.2;
    // Optional replacements for the default shapes.
    std::function<double(double)> hole_term;
    std::function<double(int)> plane_term;

    double f(double h) const;
    double g(int planes) const;
};

struct PanoCandidate {
    int index = 0;
    CameraPose pose;
    double hole_ratio = 0.0;
    std::size_t new_voxels = 0;
    int layout_planes = 0;
    double f = 0.0;
    double g = 0.0;
    double score = 0.0;
};

/// S = V * f(h) * g(P); fills f, g and score on the candidate.
double score_candidate(PanoCandidate& c, const ScoreParams& params = {});
double score_candidate(std::size_t V, double h, int P, const ScoreParams& params = {});

/// Descending score; equal scores keep ascending candidate index.
std::vector<PanoCandidate> rank_candidates(std::vector<PanoCandidate> candidates);

}  // namespace anchorpano

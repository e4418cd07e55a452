#include "anchorpano/pano_selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace anchorpano {

Bounds3 Bounds3::inflated(double fraction) const {
    const Vec3 pad = (max - min) * (fraction * 0.5);
    return {min - pad, max + pad};
}

bool Bounds3::contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
}

VoxelVisibilityGrid::VoxelVisibilityGrid(const Bounds3& b, std::array<int, 3> res) : bounds(b), resolution(res) {
    for (int r : res)
        if (r < 1) throw ConfigError("voxel resolution must be at least 1 per axis");
    if (!((b.max.array() > b.min.array()).all())) throw ConfigError("voxel bounds must have positive extent");
    observed.assign(static_cast<std::size_t>(res[0]) * res[1] * res[2], 0);
}

Vec3 VoxelVisibilityGrid::voxel_size() const {
    return {(bounds.max.x() - bounds.min.x()) / resolution[0], (bounds.max.y() - bounds.min.y()) / resolution[1],
            (bounds.max.z() - bounds.min.z()) / resolution[2]};
}

std::optional<std::array<int, 3>> VoxelVisibilityGrid::locate(const Vec3& p) const {
    if (!p.allFinite() || !bounds.contains(p)) return std::nullopt;
    const Vec3 size = voxel_size();
    std::array<int, 3> v{};
    for (int a = 0; a < 3; ++a) {
        const int i = static_cast<int>(std::floor((p[a] - bounds.min[a]) / size[a]));
        v[static_cast<std::size_t>(a)] = std::clamp(i, 0, resolution[static_cast<std::size_t>(a)] - 1);
    }
    return v;
}

std::size_t VoxelVisibilityGrid::observed_count() const {
    return static_cast<std::size_t>(std::count_if(observed.begin(), observed.end(), [](auto v) { return v != 0; }));
}

void add_view(VoxelVisibilityGrid& grid, const DepthView& view) {
    view.pose.validate();
    const int H = view.depth.rows, W = view.depth.cols;
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            const double depth = view.depth.at(r, c);
            if (!(depth > 0.0) || !std::isfinite(depth)) continue;
            const Vec3 p = view.pose.center + depth * erp_pixel_to_ray(r, c, H, W, view.pose);
            if (const auto v = grid.locate(p)) grid.observed[grid.linear((*v)[0], (*v)[1], (*v)[2])] = 1;
        }
    }
}

VoxelVisibilityGrid build_visibility_grid(std::span<const DepthView> views, const Bounds3& bounds,
                                          std::array<int, 3> resolution) {
    VoxelVisibilityGrid grid(bounds, resolution);
    for (const auto& v : views) add_view(grid, v);
    return grid;
}

std::vector<std::array<int, 3>> traverse_unobserved(const VoxelVisibilityGrid& grid, const Vec3& origin,
                                                    const Vec3& dir, double max_range) {
    std::vector<std::array<int, 3>> out;
    // Slab clip of [0, max_range] against the grid box.
    double t0 = 0.0, t1 = max_range;
    for (int a = 0; a < 3; ++a) {
        if (std::abs(dir[a]) < 1e-15) {
            if (origin[a] < grid.bounds.min[a] || origin[a] > grid.bounds.max[a]) return out;
            continue;
        }
        double ta = (grid.bounds.min[a] - origin[a]) / dir[a];
        double tb = (grid.bounds.max[a] - origin[a]) / dir[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    if (t0 > t1) return out;

    const Vec3 size = grid.voxel_size();
    const Vec3 start = origin + t0 * dir;
    std::array<int, 3> v{}, step{};
    std::array<double, 3> t_max{}, t_delta{};
    for (int a = 0; a < 3; ++a) {
        const auto ai = static_cast<std::size_t>(a);
        int i = static_cast<int>(std::floor((start[a] - grid.bounds.min[a]) / size[a]));
        // On an exit face the floor lands one past the end; moving away it is still the last voxel.
        v[ai] = std::clamp(i, 0, grid.resolution[ai] - 1);
        if (dir[a] > 0.0) {
            step[ai] = 1;
            t_max[ai] = (grid.bounds.min[a] + (v[ai] + 1) * size[a] - origin[a]) / dir[a];
            t_delta[ai] = size[a] / dir[a];
        } else if (dir[a] < 0.0) {
            step[ai] = -1;
            t_max[ai] = (grid.bounds.min[a] + v[ai] * size[a] - origin[a]) / dir[a];
            t_delta[ai] = -size[a] / dir[a];
        } else {
            step[ai] = 0;
            t_max[ai] = std::numeric_limits<double>::infinity();
            t_delta[ai] = std::numeric_limits<double>::infinity();
        }
    }

    while (true) {
        if (grid.is_observed(v[0], v[1], v[2])) break;
        out.push_back(v);
        std::size_t axis = 0;
        if (t_max[1] < t_max[axis]) axis = 1;
        if (t_max[2] < t_max[axis]) axis = 2;
        if (t_max[axis] > t1) break;
        v[axis] += step[axis];
        if (v[axis] < 0 || v[axis] >= grid.resolution[axis]) break;
        t_max[axis] += t_delta[axis];
    }
    return out;
}

std::size_t count_new_voxels(const CameraPose& pose, const Mask& hole_mask, const VoxelVisibilityGrid& grid,
                             const VoxelCountOptions& opts) {
    if (opts.stride < 1) throw ConfigError("ray stride must be at least 1");
    if (!(opts.max_range > 0.0)) throw ConfigError("max range must be positive");
    const int H = hole_mask.rows, W = hole_mask.cols;
    std::unordered_set<std::size_t> seen;
    for (int r = 0; r < H; r += opts.stride) {
        for (int c = 0; c < W; c += opts.stride) {
            if (!hole_mask.at(r, c)) continue;
            const Vec3 d = erp_pixel_to_ray(r, c, H, W, pose);
            for (const auto& v : traverse_unobserved(grid, pose.center, d, opts.max_range))
                seen.insert(grid.linear(v[0], v[1], v[2]));
        }
    }
    return seen.size();
}

double ScoreParams::f(double h) const {
    if (hole_term) return hole_term(h);
    const double z = (h - h_star) / sigma_h;
    return std::exp(-0.5 * z * z);
}

double ScoreParams::g(int planes) const {
    if (plane_term) return plane_term(planes);
    return std::log1p(static_cast<double>(std::max(planes, 0)));
}

double score_candidate(std::size_t V, double h, int P, const ScoreParams& params) {
    if (!(h >= 0.0 && h <= 1.0)) throw DataError("hole ratio must lie in [0, 1]");
    return static_cast<double>(V) * params.f(h) * params.g(P);
}

double score_candidate(PanoCandidate& c, const ScoreParams& params) {
    if (!(c.hole_ratio >= 0.0 && c.hole_ratio <= 1.0)) throw DataError("hole ratio must lie in [0, 1]");
    c.f = params.f(c.hole_ratio);
    c.g = params.g(c.layout_planes);
    c.score = static_cast<double>(c.new_voxels) * c.f * c.g;
    return c.score;
}

std::vector<PanoCandidate> rank_candidates(std::vector<PanoCandidate> candidates) {
    std::stable_sort(candidates.begin(), candidates.end(), [](const PanoCandidate& a, const PanoCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.index < b.index;
    });
    return candidates;
}

}  // namespace anchorpano

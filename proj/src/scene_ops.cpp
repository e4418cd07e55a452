#include "anchorpano/scene_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace anchorpano {

PointCloud backproject(const DepthMap& depth, const CameraPose& pose, const Mask* skip, int stride) {
    if (stride < 1) throw ConfigError("stride must be at least 1");
    if (skip && !skip->same_shape(depth)) throw DataError("mask and depth map shapes differ");
    PointCloud cloud;
    for (int r = 0; r < depth.rows; r += stride)
        for (int c = 0; c < depth.cols; c += stride) {
            const double d = depth.at(r, c);
            if (!(d > 0.0) || !std::isfinite(d)) continue;
            if (skip && skip->at(r, c)) continue;
            cloud.points.push_back(pose.center + d * erp_pixel_to_ray(r, c, depth.rows, depth.cols, pose));
        }
    return cloud;
}

ExtractedPlanes extract_planes(const PointCloud& cloud, const ExtractOptions& opts) {
    if (opts.max_planes < 1) throw ConfigError("max_planes must be at least 1");
    if (opts.min_inliers < 3) throw ConfigError("min_inliers must be at least 3");
    std::vector<Plane> found;
    std::vector<double> weights;
    PointCloud remaining = cloud;
    for (int k = 0; k < opts.max_planes && remaining.points.size() >= opts.min_inliers; ++k) {
        RansacOptions ro = opts.ransac;
        ro.seed = derive_seed(opts.ransac.seed, static_cast<std::uint64_t>(k));
        RansacResult res = fit_plane_ransac(remaining, ro);
        if (res.inliers.size() < opts.min_inliers) break;
        res.plane.id = k;
        found.push_back(res.plane);
        weights.push_back(static_cast<double>(res.inliers.size()));

        std::vector<bool> drop(remaining.points.size(), false);
        for (auto i : res.inliers) drop[i] = true;
        PointCloud next;
        for (std::size_t i = 0; i < remaining.points.size(); ++i)
            if (!drop[i]) next.points.push_back(remaining.points[i]);
        remaining = std::move(next);
    }

    ExtractedPlanes out;
    out.planes = merge_planes(found, opts.merge, weights);
    for (const auto& p : out.planes) {
        std::size_t n = 0;
        for (const auto& x : cloud.points)
            if (std::abs(p.signed_distance(x)) <= opts.ransac.inlier_threshold) ++n;
        out.support.push_back(n);
    }
    return out;
}

double plane_extent(const Plane& plane, std::span<const Vec3> points, double tol) {
    const Vec3 helper = std::abs(plane.normal.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    const Vec3 u = plane.normal.cross(helper).normalized();
    const Vec3 v = plane.normal.cross(u);
    double ulo = std::numeric_limits<double>::infinity(), uhi = -ulo, vlo = ulo, vhi = -ulo;
    bool any = false;
    for (const auto& p : points) {
        if (std::abs(plane.signed_distance(p)) > tol) continue;
        any = true;
        ulo = std::min(ulo, u.dot(p));
        uhi = std::max(uhi, u.dot(p));
        vlo = std::min(vlo, v.dot(p));
        vhi = std::max(vhi, v.dot(p));
    }
    return any ? std::max(uhi - ulo, vhi - vlo) : 0.0;
}

void label_planes_heuristically(std::vector<Plane>& planes, std::span<const Vec3> points,
                                std::span<const double> camera_heights, const Vec3& up, double tol,
                                const HeuristicOptions& opts) {
    std::vector<HeuristicVerdict> verdicts;
    std::vector<double> heights;
    double lowest = std::numeric_limits<double>::infinity(), highest = -lowest;
    for (const auto& p : planes) {
        verdicts.push_back(heuristic_classify(p, up, camera_heights, plane_extent(p, points, tol), opts));
        const double nu = p.normal.dot(up);
        heights.push_back(std::abs(nu) > 1e-12 ? -p.offset / nu : 0.0);
        if (verdicts.back().semantic == SurfaceKeyword::floor) lowest = std::min(lowest, heights.back());
        if (verdicts.back().semantic == SurfaceKeyword::ceiling) highest = std::max(highest, heights.back());
    }
    // Only the lowest floor-like and highest ceiling-like planes stay layout;
    // other horizontal slabs are furniture surfaces.
    for (std::size_t i = 0; i < planes.size(); ++i) {
        auto& v = verdicts[i];
        const bool low_slab = v.semantic == SurfaceKeyword::floor && heights[i] > lowest + tol;
        const bool high_slab = v.semantic == SurfaceKeyword::ceiling && heights[i] < highest - tol;
        if (low_slab || high_slab) v = {PlaneLabel::non_layout, SurfaceKeyword::table};
        planes[i].label = v.label;
        if (v.semantic) planes[i].semantic = to_string(*v.semantic);
        else planes[i].semantic.reset();
    }
}

PlaneIdMap label_pixels(const DepthMap& depth, const CameraPose& pose, std::span<const Plane> planes, double tol,
                        const Mask* skip) {
    if (skip && !skip->same_shape(depth)) throw DataError("mask and depth map shapes differ");
    PlaneIdMap ids(depth.rows, depth.cols, kNoPlane);
    for (int r = 0; r < depth.rows; ++r)
        for (int c = 0; c < depth.cols; ++c) {
            const double d = depth.at(r, c);
            if (!(d > 0.0) || !std::isfinite(d) || (skip && skip->at(r, c))) continue;
            const Vec3 x = pose.center + d * erp_pixel_to_ray(r, c, depth.rows, depth.cols, pose);
            double best = tol;
            for (const auto& p : planes) {
                if (!p.is_layout()) continue;
                const double e = std::abs(p.signed_distance(x));
                if (e <= best && (ids.at(r, c) == kNoPlane || e < best || p.id < ids.at(r, c))) {
                    best = e;
                    ids.at(r, c) = p.id;
                }
            }
        }
    return ids;
}

Mask unobserved_mask(const DepthMap& depth, const CameraPose& pose, const VoxelVisibilityGrid& grid) {
    Mask m(depth.rows, depth.cols, 1);
    for (int r = 0; r < depth.rows; ++r)
        for (int c = 0; c < depth.cols; ++c) {
            const double d = depth.at(r, c);
            if (!(d > 0.0) || !std::isfinite(d)) continue;
            const Vec3 x = pose.center + d * erp_pixel_to_ray(r, c, depth.rows, depth.cols, pose);
            if (const auto v = grid.locate(x); v && grid.is_observed((*v)[0], (*v)[1], (*v)[2])) m.at(r, c) = 0;
        }
    return m;
}

double bounding_diagonal(std::span<const Vec3> points) {
    if (points.empty()) throw DataError("no points to bound");
    Vec3 lo = points.front(), hi = points.front();
    for (const auto& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
}

Mask plane_mask(const PlaneIdMap& ids, int plane_id) {
    Mask m(ids.rows, ids.cols, 0);
    for (std::size_t i = 0; i < ids.data.size(); ++i) m.data[i] = ids.data[i] == plane_id ? 1 : 0;
    return m;
}

}  // namespace anchorpano

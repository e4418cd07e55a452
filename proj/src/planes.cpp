#include "anchorpano/planes.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

namespace anchorpano {

const char* to_string(PlaneLabel l) {
    switch (l) {
        case PlaneLabel::layout: return "layout";
        case PlaneLabel::non_layout: return "non_layout";
        case PlaneLabel::unknown: return "unknown";
    }
    return "unknown";
}

PlaneLabel plane_label_from_string(std::string_view s) {
    if (s == "layout") return PlaneLabel::layout;
    if (s == "non_layout") return PlaneLabel::non_layout;
    if (s == "unknown") return PlaneLabel::unknown;
    throw DataError("unknown plane label '" + std::string(s) + "'");
}

void validate_planes(std::span<const Plane> planes) {
    std::set<int> ids;
    for (const auto& p : planes) {
        if (!p.normal.allFinite() || std::abs(p.normal.norm() - 1.0) > 1e-9)
            throw DataError("plane " + std::to_string(p.id) + " normal is not unit length");
        if (!std::isfinite(p.offset)) throw DataError("plane " + std::to_string(p.id) + " offset is not finite");
        if (!ids.insert(p.id).second) throw DataError("duplicate plane id " + std::to_string(p.id));
    }
}

const Plane* find_plane(std::span<const Plane> planes, int id) {
    for (const auto& p : planes)
        if (p.id == id) return &p;
    return nullptr;
}

std::optional<double> ray_plane_distance(const Vec3& o, const Vec3& d, const Plane& plane) {
    const double denom = plane.normal.dot(d);
    if (std::abs(denom) < kParallelEpsilon) return std::nullopt;
    const double L = -(plane.normal.dot(o) + plane.offset) / denom;
    if (!(L > 0.0)) return std::nullopt;
    return L;
}

namespace {

bool hit_less(const IntersectionResult& a, const IntersectionResult& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.plane_id < b.plane_id;
}

}  // namespace

std::optional<NearestHits> nearest_layout_plane(const Vec3& o, const Vec3& d, std::span<const Plane> planes) {
    std::optional<IntersectionResult> best, second;
    for (const auto& p : planes) {
        if (!p.is_layout()) continue;
        const auto L = ray_plane_distance(o, d, p);
        if (!L) continue;
        IntersectionResult hit{p.id, *L, o + *L * d};
        if (!best || hit_less(hit, *best)) {
            second = best;
            best = hit;
        } else if (!second || hit_less(hit, *second)) {
            second = hit;
        }
    }
    if (!best) return std::nullopt;
    return NearestHits{*best, second};
}

Plane fit_plane_least_squares(std::span<const Vec3> points) {
    if (points.size() < 3) throw DataError("plane fit needs at least 3 points");
    Vec3 centroid = Vec3::Zero();
    for (const auto& p : points) centroid += p;
    centroid /= static_cast<double>(points.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& p : points) {
        const Vec3 q = p - centroid;
        cov += q * q.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    // Eigenvalues ascending.
    Vec3 n = eig.eigenvectors().col(0).normalized();
    double offset = -n.dot(centroid);
    if (offset < 0.0) {
        n = -n;
        offset = -offset;
    }
    Plane plane;
    plane.normal = n;
    plane.offset = offset;
    return plane;
}

RansacResult fit_plane_ransac(const PointCloud& cloud, const RansacOptions& opts) {
    const auto& pts = cloud.points;
    const std::size_t n = pts.size();
    if (n < 3) throw DataError("RANSAC needs at least 3 points");
    if (opts.iterations <= 0) throw ConfigError("RANSAC iterations must be positive");
    if (!(opts.inlier_threshold > 0.0)) throw ConfigError("RANSAC inlier threshold must be positive");

    double scale = 0.0;
    for (const auto& p : pts) {
        if (!p.allFinite()) throw DataError("point cloud contains non-finite coordinates");
        scale = std::max(scale, p.norm());
    }
    const double collinear_tol = 1e-12 * std::max(1.0, scale * scale);

    std::size_t best_count = 0;
    Vec3 best_n = Vec3::Zero();
    double best_d = 0.0;
    bool found = false;

    for (int it = 0; it < opts.iterations; ++it) {
        // Per-iteration stream keeps each hypothesis independent of loop order.
        std::mt19937_64 rng(derive_seed(opts.seed, static_cast<std::uint64_t>(it)));
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::size_t i0 = pick(rng), i1 = pick(rng), i2 = pick(rng);
        if (n == 3) {
            i0 = 0;
            i1 = 1;
            i2 = 2;
        }
        if (i0 == i1 || i1 == i2 || i0 == i2) continue;
        const Vec3 cr = (pts[i1] - pts[i0]).cross(pts[i2] - pts[i0]);
        const double cn = cr.norm();
        if (cn <= collinear_tol) continue;
        const Vec3 nrm = cr / cn;
        const double off = -nrm.dot(pts[i0]);
        std::size_t count = 0;
        for (const auto& p : pts)
            if (std::abs(nrm.dot(p) + off) <= opts.inlier_threshold) ++count;
        if (!found || count > best_count) {
            found = true;
            best_count = count;
            best_n = nrm;
            best_d = off;
        }
        if (n == 3) break;
    }
    if (!found) throw DataError("RANSAC failed: every sampled triple was degenerate");

    RansacResult res;
    std::vector<Vec3> inlier_pts;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(best_n.dot(pts[i]) + best_d) <= opts.inlier_threshold) {
            res.inliers.push_back(i);
            inlier_pts.push_back(pts[i]);
        }
    }
    if (inlier_pts.size() >= 3) {
        res.plane = fit_plane_least_squares(inlier_pts);
    } else {
        res.plane.normal = best_n;
        res.plane.offset = best_d;
        if (res.plane.offset < 0.0) {
            res.plane.normal = -res.plane.normal;
            res.plane.offset = -res.plane.offset;
        }
    }
    return res;
}

namespace {

struct DisjointSets {
    std::vector<std::size_t> parent;
    explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

std::vector<Plane> merge_planes(std::span<const Plane> planes, const MergeOptions& opts,
                                std::span<const double> weights) {
    if (!weights.empty() && weights.size() != planes.size())
        throw DataError("merge weights must match the plane count");

    // Canonical order: by id, so grouping and averaging never depend on input order.
    std::vector<std::size_t> order(planes.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return planes[a].id < planes[b].id; });

    const double cos_tol = std::cos(opts.angle_tol_deg * std::numbers::pi / 180.0);
    DisjointSets sets(order.size());
    for (std::size_t a = 0; a < order.size(); ++a) {
        for (std::size_t b = a + 1; b < order.size(); ++b) {
            const Plane& pa = planes[order[a]];
            const Plane& pb = planes[order[b]];
            double dot = pa.normal.dot(pb.normal);
            double ob = pb.offset;
            if (dot < 0.0) {
                dot = -dot;
                ob = -ob;
            }
            if (dot > cos_tol && std::abs(pa.offset - ob) < opts.offset_tol) sets.unite(a, b);
        }
    }

    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t a = 0; a < order.size(); ++a) groups[sets.find(a)].push_back(a);

    std::vector<Plane> out;
    out.reserve(groups.size());
    for (const auto& [root, members] : groups) {
        const Plane& ref = planes[order[members.front()]];
        Vec3 nsum = Vec3::Zero();
        double dsum = 0.0, wsum = 0.0;
        for (std::size_t m : members) {
            const Plane& p = planes[order[m]];
            const double w = weights.empty() ? 1.0 : weights[order[m]];
            const double s = p.normal.dot(ref.normal) < 0.0 ? -1.0 : 1.0;
            nsum += w * s * p.normal;
            dsum += w * s * p.offset;
            wsum += w;
        }
        Plane merged = ref;
        if (wsum > 0.0 && nsum.norm() > 0.0) {
            const double len = nsum.norm();
            merged.normal = nsum / len;
            // Offset scales with the normal renormalisation.
            merged.offset = dsum / len;
        }
        out.push_back(merged);
    }
    std::sort(out.begin(), out.end(), [](const Plane& a, const Plane& b) { return a.id < b.id; });
    return out;
}

RefinedDepth refine_depth(const DepthMap& depth, const PlaneIdMap& plane_ids, const CameraPose& pose,
                          std::span<const Plane> planes) {
    if (!depth.same_shape(plane_ids)) throw DataError("depth and plane-id maps differ in size");
    const int H = depth.rows, W = depth.cols;
    RefinedDepth out{depth, Mask(H, W, 0), 0, 0};
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            const int id = plane_ids.at(r, c);
            if (id == kNoPlane) continue;
            const Plane* p = find_plane(planes, id);
            if (!p || !p->is_layout()) continue;
            const Vec3 d = erp_pixel_to_ray(r, c, H, W, pose);
            const auto L = ray_plane_distance(pose.center, d, *p);
            if (!L) {
                out.failed.at(r, c) = 1;
                ++out.failed_count;
                continue;
            }
            out.depth.at(r, c) = *L;
            ++out.replaced;
        }
    }
    return out;
}

}  // namespace anchorpano

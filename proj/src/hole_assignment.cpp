#include "anchorpano/hole_assignment.hpp"

#include "anchorpano/kdtree2d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace anchorpano {

LatentTokenGrid::LatentTokenGrid(int r, int c, int p)
    : rows(r), cols(c), patch(p), status(static_cast<std::size_t>(r) * c, TokenStatus::observed),
      plane_id(static_cast<std::size_t>(r) * c, kNoPlane) {
    if (r <= 0 || c <= 0 || p <= 0) throw ConfigError("token grid dimensions must be positive");
}

std::vector<int> LatentTokenGrid::hole_tokens() const {
    std::vector<int> out;
    for (int i = 0; i < count(); ++i)
        if (is_hole(i)) out.push_back(i);
    return out;
}

void LatentTokenGrid::validate(std::span<const Plane> planes) const {
    if (status.size() != static_cast<std::size_t>(count()) || plane_id.size() != status.size())
        throw DataError("token grid storage does not match its dimensions");
    for (int i = 0; i < count(); ++i) {
        const int id = plane_id[static_cast<std::size_t>(i)];
        if (id != kNoPlane && !find_plane(planes, id))
            throw DataError("token " + std::to_string(i) + " references unknown plane " + std::to_string(id));
    }
}

LatentTokenGrid downsample_plane_map(const PlaneIdMap& erp_plane_map, const Mask& erp_hole_mask, int rows, int cols,
                                     int patch) {
    if (!erp_plane_map.same_shape(rows * patch, cols * patch) || !erp_hole_mask.same_shape(erp_plane_map))
        throw DataError("ERP resolution must equal the token grid times the patch size");
    LatentTokenGrid grid(rows, cols, patch);
    const int half_count = patch * patch / 2;
    for (int tr = 0; tr < rows; ++tr) {
        for (int tc = 0; tc < cols; ++tc) {
            int holes = 0;
            for (int y = tr * patch; y < (tr + 1) * patch; ++y)
                for (int x = tc * patch; x < (tc + 1) * patch; ++x) holes += erp_hole_mask.at(y, x) ? 1 : 0;
            const std::size_t i = static_cast<std::size_t>(grid.index(tr, tc));
            if (holes > half_count) {
                grid.status[i] = TokenStatus::hole;
                grid.plane_id[i] = kNoPlane;
            } else {
                grid.plane_id[i] = erp_plane_map.at(tr * patch + patch / 2, tc * patch + patch / 2);
            }
        }
    }
    return grid;
}

double geo_confidence(double L_best, std::optional<double> L_second, double sigma_L) {
    if (!(sigma_L > 0.0)) throw ConfigError("sigma_L must be positive");
    const double proximity = std::exp(-L_best / sigma_L);
    if (!L_second) return proximity;
    return proximity * (1.0 - std::exp(-(*L_second - L_best) / sigma_L));
}

double bnd_confidence(double d_best, std::optional<double> d_second, double sigma_d, double eps) {
    if (!(sigma_d > 0.0)) throw ConfigError("sigma_d must be positive");
    if (!(eps > 0.0)) throw ConfigError("epsilon must be positive");
    const double proximity = std::exp(-d_best / sigma_d);
    if (!d_second) return std::clamp(proximity, 0.0, 1.0);
    return std::clamp(proximity * (*d_second - d_best) / (d_best + eps), 0.0, 1.0);
}

std::vector<MethodVote> assign_geometric(const LatentTokenGrid& grid, const CameraPose& pose,
                                         std::span<const Plane> planes, double sigma_L) {
    if (!(sigma_L > 0.0)) throw ConfigError("sigma_L must be positive");
    std::vector<MethodVote> out;
    for (int i : grid.hole_tokens()) {
        MethodVote v;
        v.token = i;
        const int p = grid.patch;
        const Vec3 d = erp_pixel_to_ray(grid.row_of(i) * p + p / 2, grid.col_of(i) * p + p / 2, grid.rows * p,
                                        grid.cols * p, pose);
        if (const auto hits = nearest_layout_plane(pose.center, d, planes)) {
            v.plane_id = hits->best.plane_id;
            v.best_distance = hits->best.distance;
            if (hits->second) v.second_distance = hits->second->distance;
            v.confidence = geo_confidence(v.best_distance, v.second_distance, sigma_L);
        }
        out.push_back(v);
    }
    return out;
}

std::vector<std::vector<int>> boundary_tokens(const LatentTokenGrid& grid, std::span<const Plane> planes,
                                              int band_width) {
    if (band_width < 0) throw ConfigError("band width must be non-negative");
    std::vector<std::vector<int>> per_plane(planes.size());
    std::map<int, std::size_t> slot;
    for (std::size_t k = 0; k < planes.size(); ++k)
        if (planes[k].is_layout()) slot.emplace(planes[k].id, k);

    const int bw2 = band_width * band_width;
    for (int i = 0; i < grid.count(); ++i) {
        if (grid.is_hole(i)) continue;
        const auto it = slot.find(grid.plane_id[static_cast<std::size_t>(i)]);
        if (it == slot.end()) continue;
        const int r = grid.row_of(i), c = grid.col_of(i);
        bool near_hole = false;
        for (int dr = -band_width; dr <= band_width && !near_hole; ++dr) {
            for (int dc = -band_width; dc <= band_width; ++dc) {
                if (dr * dr + dc * dc > bw2) continue;
                const int rr = r + dr, cc = c + dc;
                if (rr < 0 || cc < 0 || rr >= grid.rows || cc >= grid.cols) continue;
                if (grid.is_hole(grid.index(rr, cc))) {
                    near_hole = true;
                    break;
                }
            }
        }
        if (near_hole) per_plane[it->second].push_back(i);
    }
    return per_plane;
}

std::vector<MethodVote> assign_boundary(const LatentTokenGrid& grid, std::span<const Plane> planes,
                                        const BoundaryOptions& opts) {
    const auto members = boundary_tokens(grid, planes, opts.band_width);

    struct Candidate {
        int plane_id;
        KdTree2D tree;
    };
    std::vector<Candidate> candidates;
    for (std::size_t k = 0; k < planes.size(); ++k) {
        if (members[k].empty()) continue;
        std::vector<Point2> pts;
        pts.reserve(members[k].size());
        for (int t : members[k]) pts.push_back({static_cast<double>(grid.col_of(t)), static_cast<double>(grid.row_of(t))});
        candidates.push_back({planes[k].id, KdTree2D(pts)});
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const Candidate& a, const Candidate& b) { return a.plane_id < b.plane_id; });

    std::vector<MethodVote> out;
    for (int i : grid.hole_tokens()) {
        MethodVote v;
        v.token = i;
        const Point2 q{static_cast<double>(grid.col_of(i)), static_cast<double>(grid.row_of(i))};
        constexpr std::pair<double, int> none{std::numeric_limits<double>::infinity(), kNoPlane};
        std::pair<double, int> best = none, second = none;
        for (const auto& cand : candidates) {
            const auto hit = cand.tree.nearest(q);
            const std::pair<double, int> entry{hit->distance, cand.plane_id};
            if (best.second == kNoPlane || entry < best) {
                second = best;
                best = entry;
            } else if (second.second == kNoPlane || entry < second) {
                second = entry;
            }
        }
        if (best.second != kNoPlane) {
            v.plane_id = best.second;
            v.best_distance = best.first;
            if (second.second != kNoPlane) v.second_distance = second.first;
            v.confidence = bnd_confidence(v.best_distance, v.second_distance, opts.sigma_d, opts.eps);
        }
        out.push_back(v);
    }
    return out;
}

std::vector<Assignment> fuse_assignments(std::span<const MethodVote> geo, std::span<const MethodVote> bnd,
                                         double w_geo, double w_bnd) {
    if (w_geo < 0.0 || w_bnd < 0.0) throw ConfigError("fusion weights must be non-negative");
    if (geo.size() != bnd.size()) throw DataError("assignment methods cover different token sets");
    std::vector<Assignment> out;
    out.reserve(geo.size());
    for (std::size_t k = 0; k < geo.size(); ++k) {
        if (geo[k].token != bnd[k].token) throw DataError("assignment methods cover different token sets");
        Assignment a;
        a.token = geo[k].token;
        a.geo_plane = geo[k].plane_id;
        a.bnd_plane = bnd[k].plane_id;

        std::set<int> candidates;
        if (geo[k].plane_id) candidates.insert(*geo[k].plane_id);
        if (bnd[k].plane_id) candidates.insert(*bnd[k].plane_id);
        // Ascending ids with strict > keeps the lowest id on ties.
        for (int g : candidates) {
            const double cg = geo[k].plane_id == g ? geo[k].confidence : 0.0;
            const double cb = bnd[k].plane_id == g ? bnd[k].confidence : 0.0;
            const double total = w_geo * cg + w_bnd * cb;
            if (!a.plane_id || total > a.confidence) {
                a.plane_id = g;
                a.confidence = total;
                a.c_geo = cg;
                a.c_bnd = cb;
            }
        }
        out.push_back(a);
    }
    return out;
}

Grid<double> confidence_map(std::span<const Assignment> assignments, const LatentTokenGrid& grid) {
    Grid<double> m(grid.rows, grid.cols, 0.0);
    for (const auto& a : assignments) {
        if (a.token < 0 || a.token >= grid.count()) throw DataError("assignment token out of range");
        if (a.plane_id) m.data[static_cast<std::size_t>(a.token)] = a.confidence;
    }
    return m;
}

Grid<int> assignment_map(std::span<const Assignment> assignments, const LatentTokenGrid& grid) {
    Grid<int> m(grid.rows, grid.cols, kNoPlane);
    for (int i = 0; i < grid.count(); ++i)
        if (!grid.is_hole(i)) m.data[static_cast<std::size_t>(i)] = grid.plane_id[static_cast<std::size_t>(i)];
    for (const auto& a : assignments) {
        if (a.token < 0 || a.token >= grid.count()) throw DataError("assignment token out of range");
        if (a.plane_id) m.data[static_cast<std::size_t>(a.token)] = *a.plane_id;
    }
    return m;
}

}  // namespace anchorpano

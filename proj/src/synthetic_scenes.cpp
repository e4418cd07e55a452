#include "anchorpano/synthetic_scenes.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace anchorpano {

namespace {

constexpr double kPi = std::numbers::pi;

// Kept separate from erp_geometry so the renderer stays an independent oracle.
Vec3 panorama_direction(double r, double c, int H, int W, const Mat3& R) {
    const double lon = (2.0 * (c + 0.5) / W - 1.0) * kPi;
    const double lat = (0.5 - (r + 0.5) / H) * kPi;
    const double cl = std::cos(lat);
    return R * Vec3(cl * std::sin(lon), -std::sin(lat), cl * std::cos(lon));
}

std::array<float, 3> hsv(double h, double s, double v) {
    h = std::fmod(h, 1.0) * 6.0;
    const int i = static_cast<int>(h) % 6;
    const double f = h - std::floor(h);
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    double r = v, g = t, b = p;
    switch (i) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
    return {static_cast<float>(r), static_cast<float>(g), static_cast<float>(b)};
}

Plane axis_plane(int id, int axis, double position, double sign, const char* semantic) {
    Plane p;
    p.id = id;
    p.normal = Vec3::Zero();
    p.normal[axis] = sign;
    p.offset = -sign * position;
    p.label = PlaneLabel::layout;
    p.semantic = semantic;
    return p;
}

Surface rect(int id, int axis, double position, Vec3 lo, Vec3 hi) { return Surface{id, axis, position, lo, hi}; }

void assign_materials(SyntheticRoom& room, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double hue0 = u(rng);
    const std::size_t n = room.planes.size();
    room.materials.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        room.materials[k].color = hsv(hue0 + static_cast<double>(k) / static_cast<double>(n), 0.55, 0.85);
        room.materials[k].checker_size = 0.25 + 0.25 * u(rng);
    }
}

struct Hit {
    double t = std::numeric_limits<double>::infinity();
    const Surface* surface = nullptr;
};

Hit trace(const SyntheticRoom& room, const Vec3& o, const Vec3& d) {
    Hit best;
    for (const auto& s : room.surfaces) {
        const int a = s.axis;
        if (std::abs(d[a]) < 1e-12) continue;
        const double t = (s.position - o[a]) / d[a];
        if (!(t > 0.0)) continue;
        const Vec3 p = o + t * d;
        bool inside = true;
        for (int b = 0; b < 3 && inside; ++b) {
            if (b == a) continue;
            inside = p[b] >= s.lo[b] - 1e-9 && p[b] <= s.hi[b] + 1e-9;
        }
        if (!inside) continue;
        if (t < best.t || (t == best.t && best.surface && s.plane_id < best.surface->plane_id)) {
            best.t = t;
            best.surface = &s;
        }
    }
    return best;
}

std::array<float, 3> shade(const SyntheticRoom& room, const Surface& s, const Vec3& p) {
    const auto& m = room.material(s.plane_id);
    const int u_axis = s.axis == 0 ? 1 : 0;
    const int v_axis = s.axis == 2 ? 1 : 2;
    const long cu = static_cast<long>(std::floor(p[u_axis] / m.checker_size));
    const long cv = static_cast<long>(std::floor(p[v_axis] / m.checker_size));
    const float k = ((cu + cv) & 1) ? 0.75f : 1.0f;
    return {m.color[0] * k, m.color[1] * k, m.color[2] * k};
}

}  // namespace

bool SyntheticRoom::contains(const Vec3& p) const {
    const Vec3 half = 0.5 * dims;
    if (!((p.array() > -half.array()).all() && (p.array() < half.array()).all())) return false;
    if (shape == RoomShape::l_shape && p.x() >= half.x() - cut_w && p.z() >= half.z() - cut_d) return false;
    return true;
}

const SurfaceMaterial& SyntheticRoom::material(int plane_id) const {
    for (std::size_t k = 0; k < planes.size(); ++k)
        if (planes[k].id == plane_id) return materials.at(k);
    throw DataError("room has no plane " + std::to_string(plane_id));
}

SyntheticRoom make_box_room(double w, double h, double d, std::uint64_t seed) {
    if (!(w > 0 && h > 0 && d > 0)) throw ConfigError("room dimensions must be positive");
    SyntheticRoom room;
    room.shape = RoomShape::box;
    room.dims = Vec3(w, h, d);
    const Vec3 lo = -0.5 * room.dims, hi = 0.5 * room.dims;
    room.planes = {
        axis_plane(0, 1, lo.y(), 1.0, "floor"),  axis_plane(1, 1, hi.y(), -1.0, "ceiling"),
        axis_plane(2, 2, hi.z(), -1.0, "wall"),  axis_plane(3, 2, lo.z(), 1.0, "wall"),
        axis_plane(4, 0, hi.x(), -1.0, "wall"),  axis_plane(5, 0, lo.x(), 1.0, "wall"),
    };
    room.surfaces = {
        rect(0, 1, lo.y(), lo, hi), rect(1, 1, hi.y(), lo, hi), rect(2, 2, hi.z(), lo, hi),
        rect(3, 2, lo.z(), lo, hi), rect(4, 0, hi.x(), lo, hi), rect(5, 0, lo.x(), lo, hi),
    };
    assign_materials(room, seed);
    return room;
}

SyntheticRoom make_l_room(double w, double h, double d, double cut_w, double cut_d, std::uint64_t seed) {
    if (!(w > 0 && h > 0 && d > 0)) throw ConfigError("room dimensions must be positive");
    if (!(cut_w > 0 && cut_w < w && cut_d > 0 && cut_d < d)) throw ConfigError("L cut must lie inside the room");
    SyntheticRoom room;
    room.shape = RoomShape::l_shape;
    room.dims = Vec3(w, h, d);
    room.cut_w = cut_w;
    room.cut_d = cut_d;
    const Vec3 lo = -0.5 * room.dims, hi = 0.5 * room.dims;
    const double xi = hi.x() - cut_w;  // inner wall x
    const double zi = hi.z() - cut_d;  // inner wall z
    room.planes = {
        axis_plane(0, 1, lo.y(), 1.0, "floor"), axis_plane(1, 1, hi.y(), -1.0, "ceiling"),
        axis_plane(2, 2, hi.z(), -1.0, "wall"), axis_plane(3, 2, lo.z(), 1.0, "wall"),
        axis_plane(4, 0, hi.x(), -1.0, "wall"), axis_plane(5, 0, lo.x(), 1.0, "wall"),
        axis_plane(6, 0, xi, -1.0, "wall"),     axis_plane(7, 2, zi, -1.0, "wall"),
    };
    room.surfaces = {
        rect(0, 1, lo.y(), lo, Vec3(hi.x(), hi.y(), zi)),
        rect(0, 1, lo.y(), Vec3(lo.x(), lo.y(), zi), Vec3(xi, hi.y(), hi.z())),
        rect(1, 1, hi.y(), lo, Vec3(hi.x(), hi.y(), zi)),
        rect(1, 1, hi.y(), Vec3(lo.x(), lo.y(), zi), Vec3(xi, hi.y(), hi.z())),
        rect(2, 2, hi.z(), lo, Vec3(xi, hi.y(), hi.z())),
        rect(3, 2, lo.z(), lo, hi),
        rect(4, 0, hi.x(), lo, Vec3(hi.x(), hi.y(), zi)),
        rect(5, 0, lo.x(), lo, hi),
        rect(6, 0, xi, Vec3(xi, lo.y(), zi), Vec3(xi, hi.y(), hi.z())),
        rect(7, 2, zi, Vec3(xi, lo.y(), zi), Vec3(hi.x(), hi.y(), zi)),
    };
    assign_materials(room, seed);
    return room;
}

int add_tabletop(SyntheticRoom& room, double x0, double x1, double z0, double z1, double height) {
    int id = 0;
    for (const auto& p : room.planes) id = std::max(id, p.id + 1);
    Plane p = axis_plane(id, 1, height, 1.0, "table");
    p.label = PlaneLabel::non_layout;
    room.planes.push_back(p);
    room.surfaces.push_back(rect(id, 1, height, Vec3(x0, height, z0), Vec3(x1, height, z1)));
    SurfaceMaterial m;
    m.color = {0.55f, 0.35f, 0.2f};
    m.checker_size = 0.1;
    room.materials.push_back(m);
    return id;
}

HoleSpec HoleSpec::random_patches(int count, double max_side_fraction, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    HoleSpec spec;
    int attempts = 0;
    while (static_cast<int>(spec.rects.size()) < count && attempts++ < 1000 * std::max(count, 1)) {
        const double wl = (0.2 + 0.8 * u(rng)) * max_side_fraction * 2.0 * kPi;
        const double hl = (0.2 + 0.8 * u(rng)) * max_side_fraction * kPi;
        const double l0 = -kPi + u(rng) * (2.0 * kPi - wl);
        const double p0 = -0.5 * kPi + u(rng) * (kPi - hl);
        const HoleRect r{l0, l0 + wl, p0, p0 + hl};
        const bool overlaps = std::any_of(spec.rects.begin(), spec.rects.end(), [&](const HoleRect& o) {
            return r.lon_min < o.lon_max && o.lon_min < r.lon_max && r.lat_min < o.lat_max && o.lat_min < r.lat_max;
        });
        if (!overlaps) spec.rects.push_back(r);
    }
    return spec;
}

double HoleSpec::area_fraction() const {
    double a = 0.0;
    for (const auto& r : rects) a += (r.lon_max - r.lon_min) * (r.lat_max - r.lat_min);
    return a / (2.0 * kPi * kPi);
}

bool HoleSpec::covers(double lon, double lat) const {
    return std::any_of(rects.begin(), rects.end(), [&](const HoleRect& r) {
        return lon >= r.lon_min && lon < r.lon_max && lat >= r.lat_min && lat < r.lat_max;
    });
}

ErpRender render_erp(const SyntheticRoom& room, const CameraPose& pose, int H, int W, const HoleSpec& holes) {
    if (H <= 0 || W != 2 * H) throw DataError("ERP size must satisfy W = 2H");
    if (!room.contains(pose.center)) throw DataError("camera is outside the room");
    pose.validate();
    ErpRender out{Image(W, H, 4), DepthMap(H, W, 0.0), PlaneIdMap(H, W, kNoPlane), Mask(H, W, 0)};
    for (int r = 0; r < H; ++r) {
        const double lat = (0.5 - (r + 0.5) / H) * kPi;
        for (int c = 0; c < W; ++c) {
            const double lon = (2.0 * (c + 0.5) / W - 1.0) * kPi;
            const Vec3 d = panorama_direction(r, c, H, W, pose.rotation);
            const Hit hit = trace(room, pose.center, d);
            if (hit.surface) {
                out.depth.at(r, c) = hit.t;
                out.plane_ids.at(r, c) = hit.surface->plane_id;
            }
            if (holes.covers(lon, lat)) {
                out.holes.at(r, c) = 1;
                continue;
            }
            if (!hit.surface) continue;
            const auto rgb = shade(room, *hit.surface, pose.center + hit.t * d);
            for (int ch = 0; ch < 3; ++ch) out.image.at(r, c, ch) = rgb[static_cast<std::size_t>(ch)];
            out.image.at(r, c, 3) = 1.0f;
        }
    }
    return out;
}

CubemapRender render_cubemap(const SyntheticRoom& room, const CameraPose& pose, int N) {
    if (N <= 0) throw DataError("face resolution must be positive");
    if (!room.contains(pose.center)) throw DataError("camera is outside the room");
    CubemapRender out;
    out.faces.resolution = N;
    for (CubeFace f : kAllFaces) {
        Image& img = out.faces.face(f);
        img = Image(N, N, 4);
        PlaneIdMap& ids = out.plane_ids[static_cast<std::size_t>(f)];
        ids = PlaneIdMap(N, N, kNoPlane);
        for (int r = 0; r < N; ++r) {
            for (int c = 0; c < N; ++c) {
                const Vec3 d = face_pixel_to_ray(f, r, c, N, pose);
                const Hit hit = trace(room, pose.center, d);
                if (!hit.surface) continue;
                const auto rgb = shade(room, *hit.surface, pose.center + hit.t * d);
                for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = rgb[static_cast<std::size_t>(ch)];
                img.at(r, c, 3) = 1.0f;
                ids.at(r, c) = hit.surface->plane_id;
            }
        }
    }
    return out;
}

std::vector<std::optional<int>> ground_truth_assignment(const SyntheticRoom& room, const CameraPose& pose, int rows,
                                                        int cols, int patch, const std::vector<bool>& hole_tokens) {
    if (hole_tokens.size() != static_cast<std::size_t>(rows) * cols)
        throw DataError("hole token mask does not match the grid");
    if (patch <= 0) throw ConfigError("patch size must be positive");
    // One (axis, position) per layout plane, read off the room's surfaces.
    struct AxisPlane {
        int id;
        int axis;
        double position;
    };
    std::vector<AxisPlane> layout;
    for (const auto& s : room.surfaces) {
        const auto it = std::find_if(room.planes.begin(), room.planes.end(), [&](const Plane& p) { return p.id == s.plane_id; });
        if (it == room.planes.end() || it->label != PlaneLabel::layout) continue;
        if (std::none_of(layout.begin(), layout.end(), [&](const AxisPlane& a) { return a.id == s.plane_id; }))
            layout.push_back({s.plane_id, s.axis, s.position});
    }
    std::vector<std::optional<int>> out(hole_tokens.size());
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * cols + c;
            if (!hole_tokens[i]) continue;
            const Vec3 d = panorama_direction(r * patch + patch / 2, c * patch + patch / 2, rows * patch, cols * patch,
                                              pose.rotation);
            double best_t = std::numeric_limits<double>::infinity();
            for (const auto& a : layout) {
                if (std::abs(d[a.axis]) < 1e-8) continue;
                const double t = (a.position - pose.center[a.axis]) / d[a.axis];
                if (!(t > 0.0)) continue;
                if (t < best_t || (t == best_t && a.id < *out[i])) {
                    best_t = t;
                    out[i] = a.id;
                }
            }
        }
    }
    return out;
}

SyntheticRoom make_seeded_room(std::uint64_t seed, std::optional<RoomShape> shape) {
    std::mt19937_64 rng(derive_seed(seed, "room"));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double w = 3.0 + 3.0 * u(rng), h = 2.4 + 0.8 * u(rng), d = 3.0 + 3.0 * u(rng);
    const RoomShape s = shape.value_or(seed % 2 == 0 ? RoomShape::box : RoomShape::l_shape);
    if (s == RoomShape::box) return make_box_room(w, h, d, seed);
    return make_l_room(w, h, d, w * (0.3 + 0.2 * u(rng)), d * (0.3 + 0.2 * u(rng)), seed);
}

CameraPose seeded_interior_pose(const SyntheticRoom& room, std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, "pose"));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Vec3 half = 0.5 * room.dims;
    CameraPose pose;
    for (int attempt = 0; attempt < 10000; ++attempt) {
        const Vec3 p(half.x() * (1.2 * u(rng) - 0.6), half.y() * (0.6 * u(rng) - 0.3),
                     half.z() * (1.2 * u(rng) - 0.6));
        // Keep a margin from the L cut as well.
        const Vec3 margin(0.25, 0.0, 0.25);
        if (room.contains(p) && room.contains(p + margin) && room.contains(p - margin)) {
            pose.center = p;
            break;
        }
    }
    const double yaw = (2.0 * u(rng) - 1.0) * kPi;
    // Camera y points down, world y up.
    const Mat3 flip = Vec3(1.0, -1.0, -1.0).asDiagonal();
    pose.rotation = Eigen::AngleAxisd(yaw, Vec3::UnitY()).toRotationMatrix() * flip;
    return pose;
}

}  // namespace anchorpano

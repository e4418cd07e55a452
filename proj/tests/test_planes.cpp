#include "anchorpano/planes.hpp"
#include "anchorpano/synthetic_scenes.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

using namespace anchorpano;

namespace {

Plane make_plane(int id, Vec3 n, double offset, PlaneLabel label = PlaneLabel::layout) {
    Plane p;
    p.id = id;
    p.normal = n.normalized();
    p.offset = offset;
    p.label = label;
    return p;
}

double angle_deg(const Vec3& a, const Vec3& b) {
    return std::acos(std::clamp(std::abs(a.dot(b)), 0.0, 1.0)) * 180.0 / std::numbers::pi;
}

}  // namespace

TEST_CASE("ray_plane_distance worked examples") {
    const Plane z2 = make_plane(0, {0, 0, 1}, -2.0);
    CHECK(*ray_plane_distance({0, 0, 0}, {0, 0, 1}, z2) == doctest::Approx(2.0));
    CHECK_FALSE(ray_plane_distance({0, 0, 0}, {1, 0, 0}, z2).has_value());
    CHECK(*ray_plane_distance({1, 1, 1}, {0, -1, 0}, make_plane(1, {0, 1, 0}, 0.0)) == doctest::Approx(1.0));
    // Behind the origin.
    CHECK_FALSE(ray_plane_distance({0, 0, 0}, {0, 0, -1}, z2).has_value());
    // On the plane: L = 0 is not in front.
    CHECK_FALSE(ray_plane_distance({0, 0, 2}, {0, 0, 1}, z2).has_value());
}

TEST_CASE("returned hits lie on the plane") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    int hits = 0;
    for (int i = 0; i < 10000; ++i) {
        const Plane p = make_plane(0, Vec3(n(rng), n(rng), n(rng)), n(rng));
        const Vec3 o(n(rng), n(rng), n(rng));
        const Vec3 d = Vec3(n(rng), n(rng), n(rng)).normalized();
        const auto L = ray_plane_distance(o, d, p);
        if (!L) continue;
        ++hits;
        REQUIRE(*L > 0.0);
        REQUIRE(std::abs(p.normal.dot(o + *L * d) + p.offset) < 1e-9 * std::max(1.0, *L));
    }
    CHECK(hits > 1000);
}

TEST_CASE("nearest layout plane in a box room") {
    const SyntheticRoom room = make_box_room(4.0, 3.0, 6.0, 1);
    const auto hits = nearest_layout_plane(Vec3::Zero(), Vec3(0, 0, 1), room.planes);
    REQUIRE(hits);
    CHECK(hits->best.plane_id == 2);
    CHECK(hits->best.distance == doctest::Approx(3.0));
    CHECK_FALSE(hits->second.has_value());  // every other wall is parallel or behind

    CHECK_FALSE(nearest_layout_plane(Vec3::Zero(), Vec3(0, 0, 1), std::vector<Plane>{}).has_value());
    std::vector<Plane> nonlayout = room.planes;
    for (auto& p : nonlayout) p.label = PlaneLabel::non_layout;
    CHECK_FALSE(nearest_layout_plane(Vec3::Zero(), Vec3(0, 0, 1), nonlayout).has_value());
}

TEST_CASE("a ray through a room edge resolves to the lower id") {
    // Cube of side 2: the diagonal ray in x-z hits walls 2 (z=+1) and 4 (x=+1) at the same distance.
    const SyntheticRoom room = make_box_room(2.0, 2.0, 2.0, 1);
    const auto hits = nearest_layout_plane(Vec3::Zero(), Vec3(1, 0, 1).normalized(), room.planes);
    REQUIRE(hits);
    CHECK(hits->best.plane_id == 2);
    REQUIRE(hits->second);
    CHECK(hits->second->plane_id == 4);
    CHECK(hits->best.distance == hits->second->distance);
}

TEST_CASE("nearest layout plane agrees with a brute-force minimum") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> n(0.0, 1.0);
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const SyntheticRoom room = make_seeded_room(seed);
        const Vec3 o = seeded_interior_pose(room, seed).center;
        for (int i = 0; i < 2500; ++i) {
            const Vec3 d = Vec3(n(rng), n(rng), n(rng)).normalized();
            double best = std::numeric_limits<double>::infinity();
            int best_id = -1;
            for (const auto& p : room.planes) {
                const double den = p.normal.dot(d);
                if (std::abs(den) < 1e-8) continue;
                const double L = -(p.normal.dot(o) + p.offset) / den;
                if (L > 0.0 && (L < best || (L == best && p.id < best_id))) {
                    best = L;
                    best_id = p.id;
                }
            }
            const auto hits = nearest_layout_plane(o, d, room.planes);
            REQUIRE(hits);
            REQUIRE(hits->best.plane_id == best_id);
            REQUIRE(hits->best.distance == doctest::Approx(best).epsilon(1e-12));
        }
    }
}

TEST_CASE("RANSAC recovers z=2 among outliers") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    PointCloud cloud;
    for (int i = 0; i < 100; ++i) cloud.points.emplace_back(u(rng), u(rng), 2.0);
    for (int i = 0; i < 10; ++i) cloud.points.emplace_back(u(rng), u(rng), 2.0 + 0.5 + u(rng) * 0.4);
    const RansacResult res = fit_plane_ransac(cloud, {1000, 0.01, 11});
    CHECK(angle_deg(res.plane.normal, Vec3(0, 0, 1)) < 0.5);
    CHECK(std::abs(res.plane.offset) == doctest::Approx(2.0).epsilon(0.005));
    CHECK(res.inliers.size() == 100);
    CHECK(res.plane.offset >= 0.0);
}

TEST_CASE("RANSAC on three points interpolates them exactly") {
    PointCloud cloud;
    cloud.points = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    const RansacResult res = fit_plane_ransac(cloud, {10, 1e-6, 1});
    for (const auto& p : cloud.points) CHECK(std::abs(res.plane.signed_distance(p)) < 1e-12);
    CHECK(res.plane.normal.dot(Vec3(1, 1, 1).normalized()) == doctest::Approx(-1.0));
}

TEST_CASE("RANSAC prefers the majority of two parallel planes") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    PointCloud cloud;
    for (int i = 0; i < 70; ++i) cloud.points.emplace_back(u(rng), 1.0, u(rng));
    for (int i = 0; i < 30; ++i) cloud.points.emplace_back(u(rng), -1.0, u(rng));
    const RansacResult res = fit_plane_ransac(cloud, {200, 0.01, 3});
    CHECK(res.inliers.size() == 70);
    CHECK(std::abs(res.plane.signed_distance(Vec3(0, 1, 0))) < 1e-9);
}

TEST_CASE("RANSAC is reproducible and rejects degenerate input") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n(0.0, 1.0);
    PointCloud cloud;
    for (int i = 0; i < 500; ++i) cloud.points.emplace_back(n(rng), n(rng), 0.1 * n(rng));
    const RansacResult a = fit_plane_ransac(cloud, {300, 0.05, 99});
    const RansacResult b = fit_plane_ransac(cloud, {300, 0.05, 99});
    CHECK(a.inliers == b.inliers);
    CHECK(a.plane.normal == b.plane.normal);
    CHECK(a.plane.offset == b.plane.offset);

    PointCloud line;
    for (int i = 0; i < 20; ++i) line.points.emplace_back(i, 2.0 * i, 0.0);
    CHECK_THROWS_AS(fit_plane_ransac(line, {50, 0.01, 0}), DataError);
    PointCloud two;
    two.points = {{0, 0, 0}, {1, 0, 0}};
    CHECK_THROWS_AS(fit_plane_ransac(two, {50, 0.01, 0}), DataError);
    CHECK_THROWS_AS(fit_plane_ransac(cloud, {0, 0.01, 0}), ConfigError);
}

TEST_CASE("merge_planes groups duplicates and keeps distinct planes") {
    const Plane a = make_plane(3, {0, 0, 1}, 2.0);
    const Plane b = make_plane(1, {0, 0, 1}, 2.0);
    CHECK(merge_planes(std::vector<Plane>{a, b}).size() == 1);
    CHECK(merge_planes(std::vector<Plane>{a, b}).front().id == 1);

    const Plane perp = make_plane(2, {1, 0, 0}, 2.0);
    CHECK(merge_planes(std::vector<Plane>{a, perp}).size() == 2);

    // 1 degree and 1 cm apart, plus a sign-flipped copy.
    const double t = std::numbers::pi / 180.0;
    const Plane c = make_plane(5, {std::sin(t), 0, std::cos(t)}, 2.01);
    const Plane flipped = make_plane(6, {0, 0, -1}, -2.0);
    const auto merged = merge_planes(std::vector<Plane>{a, c, flipped});
    REQUIRE(merged.size() == 1);
    CHECK(merged.front().id == 3);
    CHECK(std::abs(merged.front().normal.norm() - 1.0) < 1e-12);
    CHECK(merged.front().offset == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("merge_planes is independent of input order") {
    std::vector<Plane> planes = {make_plane(0, {0, 0, 1}, 2.0), make_plane(1, {0, 0.02, 1}, 2.02),
                                 make_plane(2, {1, 0, 0}, 1.0), make_plane(3, {0, 0.04, 1}, 2.04),
                                 make_plane(4, {1, 0.01, 0}, 1.03)};
    const std::vector<double> w = {10, 20, 30, 40, 50};
    const auto ref = merge_planes(planes, {}, w);
    std::vector<std::size_t> perm = {0, 1, 2, 3, 4};
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<Plane> p2;
        std::vector<double> w2;
        for (auto i : perm) {
            p2.push_back(planes[i]);
            w2.push_back(w[i]);
        }
        const auto got = merge_planes(p2, {}, w2);
        REQUIRE(got.size() == ref.size());
        for (std::size_t k = 0; k < got.size(); ++k) {
            CHECK(got[k].id == ref[k].id);
            CHECK((got[k].normal - ref[k].normal).norm() < 1e-12);
            CHECK(got[k].offset == doctest::Approx(ref[k].offset).epsilon(1e-12));
        }
    }
}

TEST_CASE("refine_depth on the plane z=2 and an empty id map") {
    const int H = 32, W = 64;
    const CameraPose id;
    const std::vector<Plane> planes = {make_plane(0, {0, 0, 1}, -2.0)};
    DepthMap depth(H, W, 5.0);
    PlaneIdMap ids(H, W, 0);
    const RefinedDepth out = refine_depth(depth, ids, id, planes);
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            const Vec3 d = erp_pixel_to_ray(r, c, H, W, id);
            if (d.z() > 1e-8) {
                CHECK(out.depth.at(r, c) == doctest::Approx(2.0 / d.z()));
                CHECK(out.failed.at(r, c) == 0);
            } else {
                CHECK(out.depth.at(r, c) == 5.0);
                CHECK(out.failed.at(r, c) == 1);
            }
        }
    CHECK(out.replaced + out.failed_count == static_cast<std::size_t>(H * W));

    const RefinedDepth none = refine_depth(depth, PlaneIdMap(H, W, kNoPlane), id, planes);
    CHECK(none.depth.data == depth.data);
    CHECK(none.replaced == 0);
}

TEST_CASE("refined depth on a noisy wall is exactly planar") {
    const SyntheticRoom room = make_box_room(4.0, 3.0, 5.0, 2);
    const CameraPose pose = seeded_interior_pose(room, 2);
    const ErpRender r = render_erp(room, pose, 32, 64);
    std::mt19937_64 rng(12);
    std::normal_distribution<double> n(0.0, 0.05);
    DepthMap noisy = r.depth;
    for (auto& d : noisy.data) d += n(rng);
    const RefinedDepth out = refine_depth(noisy, r.plane_ids, pose, room.planes);
    double worst = 0.0;
    for (int row = 0; row < 32; ++row)
        for (int c = 0; c < 64; ++c) {
            if (r.plane_ids.at(row, c) != 4) continue;
            const Vec3 x = pose.center + out.depth.at(row, c) * erp_pixel_to_ray(row, c, 32, 64, pose);
            worst = std::max(worst, std::abs(find_plane(room.planes, 4)->signed_distance(x)));
        }
    CHECK(worst < 1e-9);
}

TEST_CASE("plane validation") {
    std::vector<Plane> ok = {make_plane(0, {0, 0, 1}, 0), make_plane(1, {1, 0, 0}, 0)};
    CHECK_NOTHROW(validate_planes(ok));
    ok[1].id = 0;
    CHECK_THROWS_AS(validate_planes(ok), DataError);
    Plane bad;
    bad.normal = Vec3(0, 0, 2);
    CHECK_THROWS_AS(validate_planes(std::vector<Plane>{bad}), DataError);
    CHECK(plane_label_from_string(to_string(PlaneLabel::non_layout)) == PlaneLabel::non_layout);
    CHECK_THROWS_AS(plane_label_from_string("walls"), DataError);
}

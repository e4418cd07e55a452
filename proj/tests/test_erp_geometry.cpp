#include "anchorpano/erp_geometry.hpp"
#include "anchorpano/losses_metrics.hpp"
#include "anchorpano/synthetic_scenes.hpp"

#include <doctest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <random>

using namespace anchorpano;

namespace {

constexpr double kPi = std::numbers::pi;

// Scalar spherical-coordinate evaluation, written without Eigen.
void oracle_ray(double r, double c, int H, int W, double out[3]) {
    const double theta = ((c + 0.5) / W * 2.0 - 1.0) * kPi;
    const double phi = (0.5 - (r + 0.5) / H) * kPi;
    out[0] = std::cos(phi) * std::sin(theta);
    out[1] = -std::sin(phi);
    out[2] = std::cos(phi) * std::cos(theta);
}

Mat3 random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    q.normalize();
    return q.toRotationMatrix();
}

double angle_between(const Vec3& a, const Vec3& b) { return std::atan2(a.cross(b).norm(), a.dot(b)); }

Image constant_image(int w, int h, std::array<float, 4> v) {
    Image img(w, h, 4);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int ch = 0; ch < 4; ++ch) img.at(r, c, ch) = v[static_cast<std::size_t>(ch)];
    return img;
}

}  // namespace

TEST_CASE("erp_pixel_to_ray reproduces the worked examples") {
    const CameraPose id;
    const Vec3 a = erp_pixel_to_ray(31.5, 63.5, 64, 128, id);
    CHECK(a.x() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(a.y() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(a.z() == doctest::Approx(1.0).epsilon(1e-12));

    const Vec3 b = erp_pixel_to_ray(31.5, 127.5, 64, 128, id);
    CHECK(b.z() == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(std::abs(b.x()) < 1e-12);

    double o[3];
    oracle_ray(15.5, 31.5, 64, 128, o);
    const Vec3 c = erp_pixel_to_ray(15.5, 31.5, 64, 128, id);
    for (int k = 0; k < 3; ++k) CHECK(c[k] == doctest::Approx(o[k]).epsilon(1e-12));
    CHECK(c.x() == doctest::Approx(-std::sqrt(0.5)));
    CHECK(c.y() == doctest::Approx(-std::sqrt(0.5)));
}

TEST_CASE("rays match the scalar oracle and are unit length under rotation") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 10000; ++i) {
        const int H = 64 + 2 * static_cast<int>(u(rng) * 100), W = 2 * H;
        const double r = u(rng) * H, c = u(rng) * W;
        CameraPose pose;
        pose.rotation = random_rotation(rng);
        const Vec3 d = erp_pixel_to_ray(r, c, H, W, pose);
        REQUIRE(std::abs(d.norm() - 1.0) < 1e-9);
        double o[3];
        oracle_ray(r, c, H, W, o);
        const Vec3 expect = pose.rotation * Vec3(o[0], o[1], o[2]);
        REQUIRE((d - expect).norm() < 1e-12);
    }
}

TEST_CASE("longitude wraps around") {
    const CameraPose id;
    for (double r : {0.0, 10.3, 31.5, 63.0}) {
        const Vec3 a = erp_pixel_to_ray(r, -0.5, 64, 128, id);
        const Vec3 b = erp_pixel_to_ray(r, 127.5, 64, 128, id);
        CHECK((a - b).norm() < 1e-9);
    }
}

TEST_CASE("ray_to_erp_pixel inverts the examples and handles the pole") {
    const CameraPose id;
    const ErpCoord a = ray_to_erp_pixel(Vec3(0, 0, 1), 64, 128, id);
    CHECK(a.row == doctest::Approx(31.5));
    CHECK(a.col == doctest::Approx(63.5));
    const ErpCoord top = ray_to_erp_pixel(Vec3(0, -1, 0), 64, 128, id);
    CHECK(top.row == doctest::Approx(-0.5));
    CHECK(top.col == 0.0);
    const ErpCoord bottom = ray_to_erp_pixel(Vec3(0, 1, 0), 64, 128, id);
    CHECK(bottom.row == doctest::Approx(63.5));
    CHECK(bottom.col == 0.0);
}

TEST_CASE("ray to pixel to ray round trip over random directions and poses") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        CameraPose pose;
        pose.rotation = random_rotation(rng);
        const Vec3 d = Vec3(n(rng), n(rng), n(rng)).normalized();
        const ErpCoord p = ray_to_erp_pixel(d, 512, 1024, pose);
        CHECK(p.col >= 0.0);
        CHECK(p.col < 1024.0);
        worst = std::max(worst, angle_between(d, erp_pixel_to_ray(p.row, p.col, 512, 1024, pose)));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("pose validation rejects reflections and non-orthonormal matrices") {
    CameraPose p;
    CHECK_NOTHROW(p.validate());
    p.rotation = Vec3(1, 1, -1).asDiagonal();
    CHECK_THROWS_AS(p.validate(), DataError);
    p.rotation = Mat3::Identity() * 1.01;
    CHECK_THROWS_AS(p.validate(), DataError);
    p.rotation = Mat3::Identity();
    p.center = Vec3(0, std::nan(""), 0);
    CHECK_THROWS_AS(p.validate(), DataError);
}

TEST_CASE("face rays and face pixels invert each other") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    CameraPose pose;
    pose.rotation = random_rotation(rng);
    const int N = 64;
    for (CubeFace f : kAllFaces) {
        for (int i = 0; i < 200; ++i) {
            const double row = u(rng) * (N - 1), col = u(rng) * (N - 1);
            const Vec3 d = face_pixel_to_ray(f, row, col, N, pose);
            const FaceCoord fc = ray_to_face_pixel(d, N, pose);
            CHECK(fc.face == f);
            CHECK(fc.row == doctest::Approx(row).epsilon(1e-9));
            CHECK(fc.col == doctest::Approx(col).epsilon(1e-9));
        }
    }
}

TEST_CASE("face bases are right-handed and the top face is above the horizon") {
    for (CubeFace f : kAllFaces) {
        const FaceBasis b = face_basis(f);
        CHECK((b.down.cross(b.forward) - b.right).norm() < 1e-12);
    }
    // Camera y points down, so the up face looks along -y and the top ERP row.
    CHECK(face_basis(CubeFace::up).forward.y() == -1.0);
    CHECK(select_face(Vec3(0.1, -0.9, 0.2)) == CubeFace::up);
    // Ties go to x, then y.
    CHECK(select_face(Vec3(1, 1, 1)) == CubeFace::right);
    CHECK(select_face(Vec3(0, -1, 1)) == CubeFace::up);
}

TEST_CASE("six constant faces partition the panorama by dominant axis") {
    const int N = 16, H = 64, W = 128;
    CubemapFaceSet faces;
    faces.resolution = N;
    for (CubeFace f : kAllFaces)
        faces.face(f) = constant_image(N, N, {static_cast<float>(static_cast<int>(f)) / 10.0f, 0.5f, 0.25f, 1.0f});
    const CameraPose id;
    const Image erp = stitch_cubemap_to_erp(faces, id, H, W);
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            double o[3];
            oracle_ray(r, c, H, W, o);
            const double ax = std::abs(o[0]), ay = std::abs(o[1]), az = std::abs(o[2]);
            int face;
            if (ax >= ay && ax >= az) face = o[0] > 0 ? 3 : 2;
            else if (ay >= az) face = o[1] > 0 ? 5 : 4;
            else face = o[2] > 0 ? 0 : 1;
            REQUIRE(erp.at(r, c, 0) == doctest::Approx(face / 10.0));
            REQUIRE(erp.at(r, c, 3) == 1.0f);
        }
}

TEST_CASE("constant panorama gives constant faces and holes propagate") {
    Image erp = constant_image(128, 64, {0.2f, 0.4f, 0.6f, 1.0f});
    const CameraPose id;
    const CubemapFaceSet faces = erp_to_cubemap(erp, id, 16);
    for (CubeFace f : kAllFaces)
        for (float v : faces.face(f).data) CHECK((v == doctest::Approx(0.2) || v == doctest::Approx(0.4) ||
                                                  v == doctest::Approx(0.6) || v == doctest::Approx(1.0)));

    // Clear alpha over the forward hemisphere's center; the front face center becomes a hole.
    for (int r = 24; r < 40; ++r)
        for (int c = 56; c < 72; ++c) erp.at(r, c, 3) = 0.0f;
    const CubemapFaceSet holed = erp_to_cubemap(erp, id, 16);
    CHECK(holed.face(CubeFace::front).at(8, 8, 3) < 0.5f);
    CHECK(holed.face(CubeFace::back).at(8, 8, 3) == 1.0f);
    const Mask m = hole_mask(stitch_cubemap_to_erp(holed, id, 64, 128));
    CHECK(m.at(31, 63) == 1);
    CHECK(m.at(31, 0) == 0);
}

TEST_CASE("hole mask thresholds alpha at 0.5") {
    Image img = constant_image(8, 4, {0, 0, 0, 1});
    CHECK(mask_fraction(hole_mask(img)) == 0.0);
    for (int c = 0; c < 8; ++c) img.at(1, c, 3) = 0.4f;
    const Mask m = hole_mask(img);
    CHECK(m.at(1, 3) == 1);
    CHECK(m.at(0, 3) == 0);
    CHECK(mask_fraction(m) == doctest::Approx(0.25));
    CHECK(mask_fraction(hole_mask(constant_image(8, 4, {0, 0, 0, 0}))) == 1.0);
}

TEST_CASE("cubemap to panorama and back keeps textured faces above 40 dB") {
    for (std::uint64_t seed : {0ULL, 1ULL}) {
        const SyntheticRoom room = make_seeded_room(seed);
        const CameraPose pose = seeded_interior_pose(room, seed);
        const int N = 128;
        const CubemapRender cube = render_cubemap(room, pose, N);
        const Image erp = stitch_cubemap_to_erp(cube.faces, pose, 1024, 2048);
        const CubemapFaceSet back = erp_to_cubemap(erp, pose, N);
        double se = 0.0;
        std::size_t n = 0;
        for (CubeFace f : kAllFaces)
            for (int r = 2; r < N - 2; ++r)
                for (int c = 2; c < N - 2; ++c)
                    for (int ch = 0; ch < 3; ++ch) {
                        const double d = cube.faces.face(f).at(r, c, ch) - back.face(f).at(r, c, ch);
                        se += d * d;
                        ++n;
                    }
        CHECK(10.0 * std::log10(1.0 / (se / static_cast<double>(n))) > 40.0);
    }
}

TEST_CASE("second cubemap round trip is idempotent on smooth content") {
    // Smooth colours over the sphere; the second pass only moves pixels by the
    // interpolation error of an already band-limited signal.
    const int N = 128;
    const CameraPose pose;
    CubemapFaceSet faces;
    faces.resolution = N;
    for (CubeFace f : kAllFaces) {
        Image img(N, N, 4);
        for (int r = 0; r < N; ++r)
            for (int c = 0; c < N; ++c) {
                const Vec3 d = face_pixel_to_ray(f, r, c, N, pose);
                img.at(r, c, 0) = static_cast<float>(0.5 + 0.4 * d.x());
                img.at(r, c, 1) = static_cast<float>(0.5 + 0.4 * d.y() * d.z());
                img.at(r, c, 2) = static_cast<float>(0.5 + 0.2 * std::sin(2.0 * d.z()));
                img.at(r, c, 3) = 1.0f;
            }
        faces.face(f) = img;
    }
    const CubemapFaceSet f1 = erp_to_cubemap(stitch_cubemap_to_erp(faces, pose, 1024, 2048), pose, N);
    const CubemapFaceSet f2 = erp_to_cubemap(stitch_cubemap_to_erp(f1, pose, 1024, 2048), pose, N);
    double worst = 0.0;
    for (CubeFace f : kAllFaces)
        for (int r = 2; r < N - 2; ++r)
            for (int c = 2; c < N - 2; ++c)
                for (int ch = 0; ch < 4; ++ch)
                    worst = std::max(worst, static_cast<double>(std::abs(f1.face(f).at(r, c, ch) - f2.face(f).at(r, c, ch))));
    CHECK(worst < 1e-4);
}

TEST_CASE("label stitching never blends ids") {
    const int N = 32;
    std::array<PlaneIdMap, 6> labels;
    for (CubeFace f : kAllFaces) labels[static_cast<std::size_t>(f)] = PlaneIdMap(N, N, static_cast<int>(f) * 10);
    labels[0].at(5, 5) = 77;
    std::mt19937_64 rng(4);
    CameraPose pose;
    pose.rotation = random_rotation(rng);
    const PlaneIdMap erp = stitch_cubemap_labels(labels, pose, 64, 128);
    for (int v : erp.data) CHECK((v % 10 == 0 || v == 77));
}

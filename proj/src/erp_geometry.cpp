#include "anchorpano/erp_geometry.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace anchorpano {

namespace {

constexpr double kPi = std::numbers::pi;

int wrap_index(int i, int n) {
    int m = i % n;
    return m < 0 ? m + n : m;
}

}  // namespace

void CameraPose::validate() const {
    if (!rotation.allFinite()) throw DataError("camera rotation is not finite");
    if ((rotation.transpose() * rotation - Mat3::Identity()).norm() >= 1e-6)
        throw DataError("camera rotation is not orthonormal");
    if (rotation.determinant() <= 0.0) throw DataError("camera rotation must have determinant +1");
    if (!center.allFinite()) throw DataError("camera center is not finite");
}

Vec3 erp_pixel_to_ray(double r, double c, int H, int W, const CameraPose& pose) {
    const double theta = ((c + 0.5) / W * 2.0 - 1.0) * kPi;
    const double phi = (0.5 - (r + 0.5) / H) * kPi;
    const Vec3 local(std::cos(phi) * std::sin(theta), -std::sin(phi), std::cos(phi) * std::cos(theta));
    return pose.rotation * local;
}

ErpCoord ray_to_erp_pixel(const Vec3& d, int H, int W, const CameraPose& pose) {
    Vec3 local = pose.rotation.transpose() * d;
    local.normalize();
    const double y = std::clamp(local.y(), -1.0, 1.0);
    const double phi = std::asin(-y);
    ErpCoord out;
    out.row = (0.5 - phi / kPi) * H - 0.5;
    if (std::abs(y) > 1.0 - 1e-9) {
        out.col = 0.0;
        return out;
    }
    const double theta = std::atan2(local.x(), local.z());
    double col = (theta / kPi + 1.0) * 0.5 * W - 0.5;
    col = std::fmod(col, static_cast<double>(W));
    if (col < 0.0) col += W;
    out.col = col;
    return out;
}

const char* face_name(CubeFace f) {
    switch (f) {
        case CubeFace::front: return "front";
        case CubeFace::back: return "back";
        case CubeFace::left: return "left";
        case CubeFace::right: return "right";
        case CubeFace::up: return "up";
        case CubeFace::down: return "down";
    }
    return "?";
}

FaceBasis face_basis(CubeFace f) {
    switch (f) {
        case CubeFace::front: return {{0, 0, 1}, {1, 0, 0}, {0, 1, 0}};
        case CubeFace::back: return {{0, 0, -1}, {-1, 0, 0}, {0, 1, 0}};
        case CubeFace::left: return {{-1, 0, 0}, {0, 0, 1}, {0, 1, 0}};
        case CubeFace::right: return {{1, 0, 0}, {0, 0, -1}, {0, 1, 0}};
        case CubeFace::up: return {{0, -1, 0}, {1, 0, 0}, {0, 0, 1}};
        case CubeFace::down: return {{0, 1, 0}, {1, 0, 0}, {0, 0, -1}};
    }
    return {};
}

CubeFace select_face(const Vec3& v) {
    const double ax = std::abs(v.x()), ay = std::abs(v.y()), az = std::abs(v.z());
    if (ax >= ay && ax >= az) return v.x() > 0 ? CubeFace::right : CubeFace::left;
    if (ay >= az) return v.y() > 0 ? CubeFace::down : CubeFace::up;
    return v.z() > 0 ? CubeFace::front : CubeFace::back;
}

Vec3 face_pixel_to_ray(CubeFace f, double row, double col, int N, const CameraPose& pose) {
    const FaceBasis b = face_basis(f);
    const double u = 2.0 * (col + 0.5) / N - 1.0;
    const double v = 2.0 * (row + 0.5) / N - 1.0;
    return (pose.rotation * (b.forward + u * b.right + v * b.down)).normalized();
}

FaceCoord ray_to_face_pixel(const Vec3& world_dir, int N, const CameraPose& pose) {
    const Vec3 local = pose.rotation.transpose() * world_dir;
    const CubeFace f = select_face(local);
    const FaceBasis b = face_basis(f);
    const double s = local.dot(b.forward);
    const double u = local.dot(b.right) / s;
    const double v = local.dot(b.down) / s;
    return {f, (v + 1.0) * 0.5 * N - 0.5, (u + 1.0) * 0.5 * N - 0.5};
}

void CubemapFaceSet::validate() const {
    if (resolution <= 0) throw DataError("cubemap face resolution must be positive");
    for (const auto& f : faces) {
        if (f.width != resolution || f.height != resolution)
            throw DataError("cubemap faces must all be resolution x resolution");
        if (f.channels != 4) throw DataError("cubemap faces must be RGBA");
    }
}

void sample_erp_bilinear(const Image& erp, double row, double col, float* out) {
    const int H = erp.height, W = erp.width;
    row = std::clamp(row, 0.0, static_cast<double>(H - 1));
    const int r0 = std::min(static_cast<int>(std::floor(row)), H - 1);
    const int r1 = std::min(r0 + 1, H - 1);
    const double fr = row - r0;
    const double cf = std::floor(col);
    const double fc = col - cf;
    const int c0 = wrap_index(static_cast<int>(cf), W);
    const int c1 = wrap_index(static_cast<int>(cf) + 1, W);
    for (int ch = 0; ch < erp.channels; ++ch) {
        const double top = (1.0 - fc) * erp.at(r0, c0, ch) + fc * erp.at(r0, c1, ch);
        const double bot = (1.0 - fc) * erp.at(r1, c0, ch) + fc * erp.at(r1, c1, ch);
        out[ch] = static_cast<float>((1.0 - fr) * top + fr * bot);
    }
}

void sample_face_bilinear(const Image& face, double row, double col, float* out) {
    const int N = face.width;
    row = std::clamp(row, 0.0, static_cast<double>(N - 1));
    col = std::clamp(col, 0.0, static_cast<double>(N - 1));
    const int r0 = std::min(static_cast<int>(row), N - 1);
    const int c0 = std::min(static_cast<int>(col), N - 1);
    const int r1 = std::min(r0 + 1, N - 1);
    const int c1 = std::min(c0 + 1, N - 1);
    const double fr = row - r0, fc = col - c0;
    for (int ch = 0; ch < face.channels; ++ch) {
        const double top = (1.0 - fc) * face.at(r0, c0, ch) + fc * face.at(r0, c1, ch);
        const double bot = (1.0 - fc) * face.at(r1, c0, ch) + fc * face.at(r1, c1, ch);
        out[ch] = static_cast<float>((1.0 - fr) * top + fr * bot);
    }
}

Image stitch_cubemap_to_erp(const CubemapFaceSet& faces, const CameraPose& pose, int H, int W) {
    faces.validate();
    if (W != 2 * H || H <= 0) throw DataError("ERP size must satisfy W = 2H");
    Image erp(W, H, 4);
    const int N = faces.resolution;
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            const Vec3 d = erp_pixel_to_ray(r, c, H, W, pose);
            const FaceCoord fc = ray_to_face_pixel(d, N, pose);
            sample_face_bilinear(faces.face(fc.face), fc.row, fc.col, &erp.at(r, c, 0));
        }
    }
    return erp;
}

CubemapFaceSet erp_to_cubemap(const Image& erp, const CameraPose& pose, int face_resolution) {
    if (erp.channels != 4) throw DataError("ERP image must be RGBA");
    if (erp.width != 2 * erp.height) throw DataError("ERP size must satisfy W = 2H");
    if (face_resolution <= 0) throw DataError("face resolution must be positive");
    CubemapFaceSet out;
    out.resolution = face_resolution;
    for (CubeFace f : kAllFaces) {
        Image& img = out.face(f);
        img = Image(face_resolution, face_resolution, 4);
        for (int r = 0; r < face_resolution; ++r) {
            for (int c = 0; c < face_resolution; ++c) {
                const Vec3 d = face_pixel_to_ray(f, r, c, face_resolution, pose);
                const ErpCoord e = ray_to_erp_pixel(d, erp.height, erp.width, pose);
                sample_erp_bilinear(erp, e.row, e.col, &img.at(r, c, 0));
            }
        }
    }
    return out;
}

PlaneIdMap stitch_cubemap_labels(const std::array<PlaneIdMap, 6>& faces, const CameraPose& pose, int H, int W) {
    const int N = faces[0].rows;
    for (const auto& f : faces)
        if (f.rows != N || f.cols != N) throw DataError("label faces must all be N x N");
    PlaneIdMap out(H, W, kNoPlane);
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            const FaceCoord fc = ray_to_face_pixel(erp_pixel_to_ray(r, c, H, W, pose), N, pose);
            const int fr = std::clamp(static_cast<int>(std::lround(fc.row)), 0, N - 1);
            const int fcol = std::clamp(static_cast<int>(std::lround(fc.col)), 0, N - 1);
            out.at(r, c) = faces[static_cast<int>(fc.face)].at(fr, fcol);
        }
    }
    return out;
}

Mask hole_mask(const Image& erp, double alpha_min) {
    if (erp.channels != 4) throw DataError("hole mask requires an RGBA image");
    Mask m(erp.height, erp.width, 0);
    for (int r = 0; r < erp.height; ++r)
        for (int c = 0; c < erp.width; ++c) m.at(r, c) = erp.at(r, c, 3) < alpha_min ? 1 : 0;
    return m;
}

double mask_fraction(const Mask& m) {
    if (m.size() == 0) return 0.0;
    std::size_t n = 0;
    for (auto v : m.data) n += v ? 1 : 0;
    return static_cast<double>(n) / static_cast<double>(m.size());
}

}  // namespace anchorpano

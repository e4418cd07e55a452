#pragma once

#include "anchorpano/core.hpp"

#include <array>

namespace anchorpano {

/// World-from-camera rotation plus camera center. The camera frame has x to
/// the right, y down and z forward, so the top ERP row looks along -y.
struct CameraPose {
    Mat3 rotation = Mat3::Identity();
    Vec3 center = Vec3::Zero();

    static CameraPose at(const Vec3& c) { return CameraPose{Mat3::Identity(), c}; }
    /// Throws DataError unless the rotation is proper orthonormal and the center finite.
    void validate() const;
};

/// Continuous ERP coordinates; pixel (r, c) has its center at (r, c).
struct ErpCoord {
    double row = 0.0;
    double col = 0.0;
};

/// World-space unit ray through ERP coordinate (r, c) of an H x W panorama.
/// theta = ((c+0.5)/W*2-1)*pi, phi = (0.5-(r+0.5)/H)*pi and the camera-frame
/// direction is (cos phi sin theta, -sin phi, cos phi cos theta).
Vec3 erp_pixel_to_ray(double r, double c, int H, int W, const CameraPose& pose);

/// Inverse of erp_pixel_to_ray. Columns are wrapped into [0, W); at the poles
/// the column is 0.
ErpCoord ray_to_erp_pixel(const Vec3& d, int H, int W, const CameraPose& pose);

enum class CubeFace : int { front = 0, back, left, right, up, down };
inline constexpr std::array<CubeFace, 6> kAllFaces{CubeFace::front, CubeFace::back, CubeFace::left,
                                                   CubeFace::right, CubeFace::up,   CubeFace::down};
const char* face_name(CubeFace f);

/// Camera-frame basis of a 90 degree face: forward axis, image-right axis,
/// image-down axis.
struct FaceBasis {
    Vec3 forward;
    Vec3 right;
    Vec3 down;
};
FaceBasis face_basis(CubeFace f);

/// Face pierced by a camera-frame direction (dominant axis; ties resolved in
/// the order x, y, z).
CubeFace select_face(const Vec3& camera_dir);

/// World ray through continuous face pixel (row, col) of an N x N face.
Vec3 face_pixel_to_ray(CubeFace f, double row, double col, int N, const CameraPose& pose);

struct FaceCoord {
    CubeFace face;
    double row;
    double col;
};
FaceCoord ray_to_face_pixel(const Vec3& world_dir, int N, const CameraPose& pose);

struct CubemapFaceSet {
    int resolution = 0;
    // Indexed by CubeFace; RGBA.
    std::array<Image, 6> faces;

    Image& face(CubeFace f) { return faces[static_cast<int>(f)]; }
    const Image& face(CubeFace f) const { return faces[static_cast<int>(f)]; }
    void validate() const;
};

/// Bilinear sample of an ERP image; columns wrap, rows clamp.
void sample_erp_bilinear(const Image& erp, double row, double col, float* out);
/// Bilinear sample of a face; both axes clamp to the edge.
void sample_face_bilinear(const Image& face, double row, double col, float* out);

/// Resamples six RGBA faces into an H x W RGBA panorama (bilinear).
Image stitch_cubemap_to_erp(const CubemapFaceSet& faces, const CameraPose& pose, int H, int W);

/// Resamples an RGBA panorama into six N x N faces (bilinear).
CubemapFaceSet erp_to_cubemap(const Image& erp, const CameraPose& pose, int face_resolution);

/// Nearest-neighbor stitching for discrete per-face labels (plane ids).
PlaneIdMap stitch_cubemap_labels(const std::array<PlaneIdMap, 6>& faces, const CameraPose& pose, int H, int W);

inline constexpr double kDefaultAlphaMin = 0.5;

/// True where alpha < alpha_min.
Mask hole_mask(const Image& erp, double alpha_min = kDefaultAlphaMin);

/// Fraction of true entries.
double mask_fraction(const Mask& m);

}  // namespace anchorpano

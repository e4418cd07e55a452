#pragma once

#include "anchorpano/core.hpp"
#include "anchorpano/erp_geometry.hpp"
#include "anchorpano/planes.hpp"

#include <optional>
#include <span>
#include <vector>

namespace anchorpano {

enum class TokenStatus : std::uint8_t { observed, hole };

/// Latent token grid; each token covers a patch x patch pixel block of the ERP.
struct LatentTokenGrid {
    int rows = 64;
    int cols = 128;
    int patch = 16;
    std::vector<TokenStatus> status;
    std::vector<int> plane_id;  // kNoPlane when unknown; always kNoPlane for holes

    LatentTokenGrid() = default;
    LatentTokenGrid(int r, int c, int p);

    int count() const { return rows * cols; }
    int index(int r, int c) const { return r * cols + c; }
    int row_of(int i) const { return i / cols; }
    int col_of(int i) const { return i % cols; }
    bool is_hole(int i) const { return status[static_cast<std::size_t>(i)] == TokenStatus::hole; }
    std::vector<int> hole_tokens() const;
    /// Throws DataError when an observed token references an unknown plane.
    void validate(std::span<const Plane> planes) const;
};

/// Nearest-neighbor downsampling: a token takes the id of its patch-center
/// pixel (row p*r + p/2, col p*c + p/2) and is a hole when more than half of
/// its patch pixels are holes.
LatentTokenGrid downsample_plane_map(const PlaneIdMap& erp_plane_map, const Mask& erp_hole_mask, int rows, int cols,
                                     int patch);

/// exp(-L_best/sigma) * (1 - exp(-(L_second - L_best)/sigma)); the margin
/// factor is 1 without a second hit.
double geo_confidence(double L_best, std::optional<double> L_second, double sigma_L);

/// exp(-d_best/sigma) * (d_second - d_best)/(d_best + eps), clamped to [0,1].
/// Without a second candidate the margin factor is 1.
double bnd_confidence(double d_best, std::optional<double> d_second, double sigma_d, double eps);

/// One assignment method's verdict for one hole token.
struct MethodVote {
    int token = 0;
    std::optional<int> plane_id;
    double confidence = 0.0;
    double best_distance = 0.0;
    std::optional<double> second_distance;
};

/// Ray through each hole token's patch-center pixel (the pixel that
/// downsampling reads), nearest positive layout-plane hit.
std::vector<MethodVote> assign_geometric(const LatentTokenGrid& grid, const CameraPose& pose,
                                         std::span<const Plane> planes, double sigma_L);

struct BoundaryOptions {
    int band_width = 3;
    double sigma_d = 4.0;
    double eps = 1e-6;
};

/// Observed layout tokens within band_width (Euclidean, token units) of any
/// hole token, for each plane.
std::vector<std::vector<int>> boundary_tokens(const LatentTokenGrid& grid, std::span<const Plane> planes,
                                              int band_width);

/// Nearest boundary token per layout plane (one kd-tree per plane); the
/// closest plane wins. Equal distances resolve to the lower plane id.
std::vector<MethodVote> assign_boundary(const LatentTokenGrid& grid, std::span<const Plane> planes,
                                        const BoundaryOptions& opts = {});

struct Assignment {
    int token = 0;
    std::optional<int> plane_id;  // absent: unassignable, never steered
    double confidence = 0.0;
    double c_geo = 0.0;  // geometric score credited to the winning plane
    double c_bnd = 0.0;  // boundary score credited to the winning plane
    std::optional<int> geo_plane;
    std::optional<int> bnd_plane;
};

/// Per candidate plane total = w_geo*c_geo + w_bnd*c_bnd; argmax wins, ties
/// to the lower plane id. Both inputs must list the same hole tokens.
std::vector<Assignment> fuse_assignments(std::span<const MethodVote> geo, std::span<const MethodVote> bnd,
                                         double w_geo = 0.5, double w_bnd = 0.5);

/// Winning confidence per token; 0 for observed and unassigned tokens.
Grid<double> confidence_map(std::span<const Assignment> assignments, const LatentTokenGrid& grid);

/// Token-grid plane map: observed ids plus assigned hole ids.
Grid<int> assignment_map(std::span<const Assignment> assignments, const LatentTokenGrid& grid);

}  // namespace anchorpano

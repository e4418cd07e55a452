#pragma once

#include "anchorpano/core.hpp"

namespace anchorpano {

struct LossWeights {
    double lambda_s = 0.2;   // D-SSIM share of the photometric loss
    double alpha_c = 0.01;   // completed-view downweight
    double lambda_d = 1.0;
    double lambda_n = 1.0;
    double lambda_k = 1.0;

    void validate() const;
};

/// Mean absolute difference over all pixels and channels.
double l1(const Image& pred, const Image& ref);

struct SsimOptions {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double peak = 1.0;
};

/// Mean SSIM over every valid window position and channel (no padding).
double ssim(const Image& a, const Image& b, const SsimOptions& opts = {});
double dssim(const Image& a, const Image& b, const SsimOptions& opts = {});

/// (1 - lambda_s) * L1 + lambda_s * D-SSIM.
double input_loss(const Image& pred, const Image& ref, double lambda_s);
/// alpha_c * input_loss.
double completed_loss(const Image& pred, const Image& ref, double lambda_s, double alpha_c);

struct GeoTerms {
    double depth = 0.0;
    double normal = 0.0;
    double curvature = 0.0;
};

double geo_loss(const GeoTerms& terms, const LossWeights& w);

inline constexpr double kPsnrCap = 100.0;

/// 10 log10(peak^2 / MSE), capped at 100 dB.
double psnr(const Image& pred, const Image& ref, double peak = 1.0);

}  // namespace anchorpano

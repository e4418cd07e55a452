#include "anchorpano/losses_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace anchorpano {

namespace {

void require_pair(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw DataError("image pair shapes differ");
    if (a.data.empty()) throw DataError("empty image pair");
}

std::vector<double> gaussian_kernel(int size, double sigma) {
    std::vector<double> k(static_cast<std::size_t>(size));
    const double c = (size - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double x = i - c;
        k[static_cast<std::size_t>(i)] = std::exp(-x * x / (2.0 * sigma * sigma));
        sum += k[static_cast<std::size_t>(i)];
    }
    for (auto& v : k) v /= sum;
    return k;
}

// Valid-mode separable filter of one channel.
std::vector<double> filter_valid(const std::vector<double>& src, int w, int h, const std::vector<double>& k) {
    const int n = static_cast<int>(k.size());
    const int ow = w - n + 1, oh = h - n + 1;
    std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < ow; ++c) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += k[static_cast<std::size_t>(i)] * src[static_cast<std::size_t>(r) * w + c + i];
            tmp[static_cast<std::size_t>(r) * ow + c] = s;
        }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int r = 0; r < oh; ++r)
        for (int c = 0; c < ow; ++c) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += k[static_cast<std::size_t>(i)] * tmp[static_cast<std::size_t>(r + i) * ow + c];
            out[static_cast<std::size_t>(r) * ow + c] = s;
        }
    return out;
}

}  // namespace

void LossWeights::validate() const {
    if (!(lambda_s >= 0.0 && lambda_s <= 1.0)) throw ConfigError("lambda_s must lie in [0, 1]");
    if (alpha_c < 0.0 || lambda_d < 0.0 || lambda_n < 0.0 || lambda_k < 0.0)
        throw ConfigError("loss weights must be non-negative");
}

double l1(const Image& pred, const Image& ref) {
    require_pair(pred, ref);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) s += std::abs(static_cast<double>(pred.data[i]) - ref.data[i]);
    return s / static_cast<double>(pred.data.size());
}

double ssim(const Image& a, const Image& b, const SsimOptions& opts) {
    require_pair(a, b);
    if (a.width < opts.window || a.height < opts.window) throw DataError("image smaller than the SSIM window");
    const auto k = gaussian_kernel(opts.window, opts.sigma);
    const double c1 = (opts.k1 * opts.peak) * (opts.k1 * opts.peak);
    const double c2 = (opts.k2 * opts.peak) * (opts.k2 * opts.peak);
    const int w = a.width, h = a.height;
    const std::size_t n = static_cast<std::size_t>(w) * h;

    double total = 0.0;
    std::size_t count = 0;
    for (int ch = 0; ch < a.channels; ++ch) {
        std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = a.data[i * a.channels + ch];
            y[i] = b.data[i * b.channels + ch];
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        const auto mx = filter_valid(x, w, h, k), my = filter_valid(y, w, h, k);
        const auto sxx = filter_valid(xx, w, h, k), syy = filter_valid(yy, w, h, k), sxy = filter_valid(xy, w, h, k);
        for (std::size_t i = 0; i < mx.size(); ++i) {
            const double vx = sxx[i] - mx[i] * mx[i];
            const double vy = syy[i] - my[i] * my[i];
            const double cov = sxy[i] - mx[i] * my[i];
            total += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
                     ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

double dssim(const Image& a, const Image& b, const SsimOptions& opts) { return (1.0 - ssim(a, b, opts)) / 2.0; }

double input_loss(const Image& pred, const Image& ref, double lambda_s) {
    if (!(lambda_s >= 0.0 && lambda_s <= 1.0)) throw ConfigError("lambda_s must lie in [0, 1]");
    const double a = lambda_s < 1.0 ? (1.0 - lambda_s) * l1(pred, ref) : 0.0;
    const double b = lambda_s > 0.0 ? lambda_s * dssim(pred, ref) : 0.0;
    return a + b;
}

double completed_loss(const Image& pred, const Image& ref, double lambda_s, double alpha_c) {
    if (alpha_c < 0.0) throw ConfigError("alpha_c must be non-negative");
    return alpha_c * input_loss(pred, ref, lambda_s);
}

double geo_loss(const GeoTerms& terms, const LossWeights& w) {
    w.validate();
    if (terms.depth < 0.0 || terms.normal < 0.0 || terms.curvature < 0.0)
        throw DataError("geometric loss terms must be non-negative");
    return w.lambda_d * terms.depth + w.lambda_n * terms.normal + w.lambda_k * terms.curvature;
}

double psnr(const Image& pred, const Image& ref, double peak) {
    require_pair(pred, ref);
    double se = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double d = static_cast<double>(pred.data[i]) - ref.data[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(pred.data.size());
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

}  // namespace anchorpano

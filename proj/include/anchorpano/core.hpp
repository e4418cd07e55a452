#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace anchorpano {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Errors carry the category the CLI maps onto exit codes.
enum class ErrorKind { config, data, service };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class ServiceError : public Error {
public:
    explicit ServiceError(const std::string& what) : Error(ErrorKind::service, what) {}
};

/// Dense row-major 2D array. Used for masks, depth maps, plane-id maps and
/// token-grid scalars.
template <typename T>
struct Grid {
    int rows = 0;
    int cols = 0;
    std::vector<T> data;

    Grid() = default;
    Grid(int r, int c, T fill = T{}) : rows(r), cols(c) {
        if (r < 0 || c < 0) throw DataError("grid dimensions must be non-negative");
        data.assign(static_cast<std::size_t>(r) * c, fill);
    }

    T& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    const T& at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    std::size_t size() const { return data.size(); }
    bool same_shape(int r, int c) const { return rows == r && cols == c; }
    template <typename U>
    bool same_shape(const Grid<U>& o) const { return rows == o.rows && cols == o.cols; }
};

using Mask = Grid<std::uint8_t>;
using DepthMap = Grid<double>;
// -1 marks "no plane".
using PlaneIdMap = Grid<std::int32_t>;
inline constexpr std::int32_t kNoPlane = -1;

/// Interleaved float image, values nominally in [0,1]. Panoramas and cubemap
/// faces use 4 channels with channel 3 holding the observed/alpha flag.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<float> data;

    Image() = default;
    Image(int w, int h, int ch, float fill = 0.0f)
        : width(w), height(h), channels(ch) {
        if (w < 0 || h < 0 || ch <= 0) throw DataError("invalid image dimensions");
        data.assign(static_cast<std::size_t>(w) * h * ch, fill);
    }

    float& at(int r, int c, int ch) { return data[(static_cast<std::size_t>(r) * width + c) * channels + ch]; }
    float at(int r, int c, int ch) const { return data[(static_cast<std::size_t>(r) * width + c) * channels + ch]; }
    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
    bool has_alpha() const { return channels == 4; }
};

/// First three channels of an RGBA image (or the image itself if it has fewer).
Image rgb_only(const Image& img);

// Deterministic seed derivation: one root seed, named sub-streams.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream);
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index);

}  // namespace anchorpano

#pragma once

#include "anchorpano/core.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace anchorpano {

// PNG: 8-bit RGBA on disk. Decoded images always carry 4 channels.
std::string encode_png(const Image& img);
Image decode_png(std::string_view bytes);
void write_png(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);
/// Grayscale PNG of a scalar grid, linearly mapped from [lo, hi] to [0, 255].
void write_png_gray(const std::filesystem::path& path, const Grid<double>& g, double lo, double hi);
Mask mask_from_png(const Image& img, double alpha_min = 0.5);

// Raw tensors: little-endian row-major payload at `path`, JSON manifest at
// `path + ".json"` of the form {"shape": [...], "dtype": "f32", "order": "row-major"}.
enum class DType { f32, i32, u8 };
const char* dtype_name(DType t);
std::size_t dtype_size(DType t);

struct RawTensor {
    std::vector<std::int64_t> shape;
    DType dtype = DType::f32;
    std::vector<std::uint8_t> bytes;

    std::size_t element_count() const;
    std::vector<float> as_f32() const;
    std::vector<std::int32_t> as_i32() const;
    std::vector<std::uint8_t> as_u8() const;

    static RawTensor from_f32(std::vector<std::int64_t> shape, std::span<const float> v);
    static RawTensor from_i32(std::vector<std::int64_t> shape, std::span<const std::int32_t> v);
    static RawTensor from_u8(std::vector<std::int64_t> shape, std::span<const std::uint8_t> v);
};

std::filesystem::path manifest_path(const std::filesystem::path& tensor_path);
void write_tensor(const std::filesystem::path& path, const RawTensor& t);
RawTensor read_tensor(const std::filesystem::path& path);

void write_grid_f32(const std::filesystem::path& path, const Grid<double>& g);
Grid<double> read_grid_f32(const std::filesystem::path& path);
void write_plane_map(const std::filesystem::path& path, const PlaneIdMap& g);
PlaneIdMap read_plane_map(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const Mask& m);
Mask read_mask(const std::filesystem::path& path);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);
nlohmann::json read_json(const std::filesystem::path& path);
/// Pretty-printed, trailing newline; byte-stable for equal documents.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace anchorpano

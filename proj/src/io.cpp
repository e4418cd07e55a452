#include "anchorpano/io.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace anchorpano {

static_assert(std::endian::native == std::endian::little, "raw tensor I/O assumes a little-endian host");

namespace {

std::uint8_t to_byte(float v) {
    if (!(v > 0.0f)) return 0;
    if (v >= 1.0f) return 255;
    return static_cast<std::uint8_t>(std::lround(v * 255.0f));
}

std::vector<std::uint8_t> to_rgba8(const Image& img) {
    std::vector<std::uint8_t> px(static_cast<std::size_t>(img.width) * img.height * 4);
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            std::uint8_t* out = &px[(static_cast<std::size_t>(r) * img.width + c) * 4];
            if (img.channels == 1) {
                out[0] = out[1] = out[2] = to_byte(img.at(r, c, 0));
                out[3] = 255;
            } else {
                for (int ch = 0; ch < 3; ++ch) out[ch] = to_byte(img.at(r, c, std::min(ch, img.channels - 1)));
                out[3] = img.channels >= 4 ? to_byte(img.at(r, c, 3)) : 255;
            }
        }
    }
    return px;
}

}  // namespace

std::string encode_png(const Image& img) {
    if (img.width <= 0 || img.height <= 0) throw DataError("cannot encode an empty image");
    const auto px = to_rgba8(img);
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = PNG_FORMAT_RGBA;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, px.data(), 0, nullptr))
        throw DataError(std::string("PNG encode failed: ") + image.message);
    std::string out(size, '\0');
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, px.data(), 0, nullptr))
        throw DataError(std::string("PNG encode failed: ") + image.message);
    out.resize(size);
    return out;
}

Image decode_png(std::string_view bytes) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
        throw DataError(std::string("PNG decode failed: ") + image.message);
    image.format = PNG_FORMAT_RGBA;
    std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, px.data(), 0, nullptr))
        throw DataError(std::string("PNG decode failed: ") + image.message);
    Image img(static_cast<int>(image.width), static_cast<int>(image.height), 4);
    for (std::size_t i = 0; i < px.size(); ++i) img.data[i] = px[i] / 255.0f;
    return img;
}

void write_png(const std::filesystem::path& path, const Image& img) { write_file(path, encode_png(img)); }

Image read_png(const std::filesystem::path& path) { return decode_png(read_file(path)); }

void write_png_gray(const std::filesystem::path& path, const Grid<double>& g, double lo, double hi) {
    Image img(g.cols, g.rows, 1);
    const double span = hi > lo ? hi - lo : 1.0;
    for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c)
            img.at(r, c, 0) = static_cast<float>(std::clamp((g.at(r, c) - lo) / span, 0.0, 1.0));
    write_png(path, img);
}

Mask mask_from_png(const Image& img, double alpha_min) {
    const int ch = img.channels >= 4 ? 3 : 0;
    Mask m(img.height, img.width, 0);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) m.at(r, c) = img.at(r, c, ch) < alpha_min ? 1 : 0;
    return m;
}

const char* dtype_name(DType t) {
    switch (t) {
        case DType::f32: return "f32";
        case DType::i32: return "i32";
        case DType::u8: return "u8";
    }
    return "?";
}

std::size_t dtype_size(DType t) { return t == DType::u8 ? 1 : 4; }

namespace {

DType dtype_from_name(const std::string& s) {
    if (s == "f32") return DType::f32;
    if (s == "i32") return DType::i32;
    if (s == "u8") return DType::u8;
    throw DataError("unsupported tensor dtype '" + s + "'");
}

template <typename T>
std::vector<T> reinterpret_payload(const RawTensor& t, DType expect) {
    if (t.dtype != expect)
        throw DataError(std::string("tensor dtype is ") + dtype_name(t.dtype) + ", expected " + dtype_name(expect));
    std::vector<T> v(t.element_count());
    std::memcpy(v.data(), t.bytes.data(), v.size() * sizeof(T));
    return v;
}

template <typename T>
RawTensor make_tensor(std::vector<std::int64_t> shape, DType dt, std::span<const T> v) {
    RawTensor t{std::move(shape), dt, {}};
    if (t.element_count() != v.size()) throw DataError("tensor shape does not match element count");
    t.bytes.resize(v.size() * sizeof(T));
    std::memcpy(t.bytes.data(), v.data(), t.bytes.size());
    return t;
}

}  // namespace

std::size_t RawTensor::element_count() const {
    std::size_t n = 1;
    for (auto s : shape) {
        if (s < 0) throw DataError("negative tensor dimension");
        n *= static_cast<std::size_t>(s);
    }
    return n;
}

std::vector<float> RawTensor::as_f32() const { return reinterpret_payload<float>(*this, DType::f32); }
std::vector<std::int32_t> RawTensor::as_i32() const { return reinterpret_payload<std::int32_t>(*this, DType::i32); }
std::vector<std::uint8_t> RawTensor::as_u8() const { return reinterpret_payload<std::uint8_t>(*this, DType::u8); }

RawTensor RawTensor::from_f32(std::vector<std::int64_t> shape, std::span<const float> v) {
    return make_tensor(std::move(shape), DType::f32, v);
}
RawTensor RawTensor::from_i32(std::vector<std::int64_t> shape, std::span<const std::int32_t> v) {
    return make_tensor(std::move(shape), DType::i32, v);
}
RawTensor RawTensor::from_u8(std::vector<std::int64_t> shape, std::span<const std::uint8_t> v) {
    return make_tensor(std::move(shape), DType::u8, v);
}

std::filesystem::path manifest_path(const std::filesystem::path& tensor_path) {
    return std::filesystem::path(tensor_path.string() + ".json");
}

void write_tensor(const std::filesystem::path& path, const RawTensor& t) {
    if (t.bytes.size() != t.element_count() * dtype_size(t.dtype)) throw DataError("tensor payload size mismatch");
    write_file(path, std::string_view(reinterpret_cast<const char*>(t.bytes.data()), t.bytes.size()));
    nlohmann::json m;
    m["shape"] = t.shape;
    m["dtype"] = dtype_name(t.dtype);
    m["order"] = "row-major";
    write_json(manifest_path(path), m);
}

RawTensor read_tensor(const std::filesystem::path& path) {
    const auto m = read_json(manifest_path(path));
    RawTensor t;
    try {
        t.shape = m.at("shape").get<std::vector<std::int64_t>>();
        t.dtype = dtype_from_name(m.at("dtype").get<std::string>());
        if (m.value("order", std::string("row-major")) != "row-major")
            throw DataError("only row-major tensors are supported");
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad tensor manifest " + manifest_path(path).string() + ": " + e.what());
    }
    const std::string payload = read_file(path);
    if (payload.size() != t.element_count() * dtype_size(t.dtype))
        throw DataError("tensor " + path.string() + " payload size does not match its manifest");
    t.bytes.assign(payload.begin(), payload.end());
    return t;
}

void write_grid_f32(const std::filesystem::path& path, const Grid<double>& g) {
    std::vector<float> v(g.data.begin(), g.data.end());
    write_tensor(path, RawTensor::from_f32({g.rows, g.cols}, v));
}

Grid<double> read_grid_f32(const std::filesystem::path& path) {
    const RawTensor t = read_tensor(path);
    if (t.shape.size() != 2) throw DataError("expected a 2D tensor in " + path.string());
    Grid<double> g(static_cast<int>(t.shape[0]), static_cast<int>(t.shape[1]));
    const auto v = t.as_f32();
    std::copy(v.begin(), v.end(), g.data.begin());
    return g;
}

void write_plane_map(const std::filesystem::path& path, const PlaneIdMap& g) {
    write_tensor(path, RawTensor::from_i32({g.rows, g.cols}, g.data));
}

PlaneIdMap read_plane_map(const std::filesystem::path& path) {
    const RawTensor t = read_tensor(path);
    if (t.shape.size() != 2) throw DataError("expected a 2D tensor in " + path.string());
    PlaneIdMap g(static_cast<int>(t.shape[0]), static_cast<int>(t.shape[1]));
    g.data = t.as_i32();
    return g;
}

void write_mask(const std::filesystem::path& path, const Mask& m) {
    write_tensor(path, RawTensor::from_u8({m.rows, m.cols}, m.data));
}

Mask read_mask(const std::filesystem::path& path) {
    const RawTensor t = read_tensor(path);
    if (t.shape.size() != 2) throw DataError("expected a 2D tensor in " + path.string());
    Mask m(static_cast<int>(t.shape[0]), static_cast<int>(t.shape[1]));
    m.data = t.as_u8();
    return m;
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr))
        throw DataError("SHA-256 computation failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return os.str();
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_file(path, j.dump(2) + "\n"); }

}  // namespace anchorpano

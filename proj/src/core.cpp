#include "anchorpano/core.hpp"

namespace anchorpano {

Image rgb_only(const Image& img) {
    if (img.channels <= 3) return img;
    Image out(img.width, img.height, 3);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c)
            for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = img.at(r, c, ch);
    return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream) {
    // FNV-1a over the stream name, then mixed with the root.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : stream) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(root ^ splitmix64(h));
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
    return splitmix64(root ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

}  // namespace anchorpano

#include "anchorpano/plane_classifier.hpp"

#include "anchorpano/io.hpp"

#include <httplib.h>
#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <queue>

namespace anchorpano {

const char* to_string(SurfaceKeyword k) {
    switch (k) {
        case SurfaceKeyword::wall: return "wall";
        case SurfaceKeyword::floor: return "floor";
        case SurfaceKeyword::ceiling: return "ceiling";
        case SurfaceKeyword::bed: return "bed";
        case SurfaceKeyword::table: return "table";
        case SurfaceKeyword::shelf: return "shelf";
        case SurfaceKeyword::cabinet: return "cabinet";
        case SurfaceKeyword::window: return "window";
        case SurfaceKeyword::door: return "door";
        case SurfaceKeyword::other: return "other";
    }
    return "other";
}

std::optional<SurfaceKeyword> keyword_from_string(std::string_view s) {
    for (auto k : kAllKeywords)
        if (s == to_string(k)) return k;
    return std::nullopt;
}

bool is_layout_keyword(SurfaceKeyword k) {
    return k == SurfaceKeyword::wall || k == SurfaceKeyword::floor || k == SurfaceKeyword::ceiling;
}

std::string build_prompt(int plane_id) {
    return "Look at the region outlined in red and marked '" + std::to_string(plane_id) +
           "' in this indoor room photo.\n"
           "Think step by step:\n"
           "1. What does this region look like?\n"
           "2. Is this region located on a wall, floor, ceiling or some other surface?\n"
           "3. Give your final answer as a single word: wall, floor, ceiling, bed, table, shelf, cabinet, "
           "window, door, or other.";
}

namespace {

bool is_word_char(char c) {
    const auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || c == '_';
}

}  // namespace

std::optional<SurfaceKeyword> parse_response(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

    std::optional<SurfaceKeyword> best;
    std::size_t best_pos = 0;
    for (auto k : kAllKeywords) {
        const std::string_view word = to_string(k);
        std::size_t pos = lower.rfind(word);
        while (pos != std::string::npos) {
            const bool left_ok = pos == 0 || !is_word_char(lower[pos - 1]);
            const std::size_t end = pos + word.size();
            const bool right_ok = end >= lower.size() || !is_word_char(lower[end]);
            if (left_ok && right_ok) break;
            if (pos == 0) {
                pos = std::string::npos;
                break;
            }
            pos = lower.rfind(word, pos - 1);
        }
        if (pos == std::string::npos) continue;
        if (!best || pos > best_pos) {
            best = k;
            best_pos = pos;
        }
    }
    return best;
}

BBox mask_bbox(const Mask& mask) {
    BBox b{mask.rows, mask.cols, -1, -1};
    for (int r = 0; r < mask.rows; ++r) {
        for (int c = 0; c < mask.cols; ++c) {
            if (!mask.at(r, c)) continue;
            b.row_min = std::min(b.row_min, r);
            b.row_max = std::max(b.row_max, r);
            b.col_min = std::min(b.col_min, c);
            b.col_max = std::max(b.col_max, c);
        }
    }
    if (b.row_max < 0) return BBox{};
    return b;
}

namespace {

// 3x5 digit glyphs, one row per nibble (bit 2 = leftmost column).
constexpr std::uint8_t kDigitGlyphs[10][5] = {
    {7, 5, 5, 5, 7}, {2, 6, 2, 2, 7}, {7, 1, 7, 4, 7}, {7, 1, 7, 1, 7}, {5, 5, 7, 1, 1},
    {7, 4, 7, 1, 7}, {7, 4, 7, 5, 7}, {7, 1, 1, 1, 1}, {7, 5, 7, 5, 7}, {7, 5, 7, 1, 7},
};

void set_rgb(Image& img, int r, int c, float red, float green, float blue) {
    if (r < 0 || c < 0 || r >= img.height || c >= img.width) return;
    img.at(r, c, 0) = red;
    if (img.channels >= 3) {
        img.at(r, c, 1) = green;
        img.at(r, c, 2) = blue;
    }
}

void stamp_number(Image& img, int center_row, int center_col, int value) {
    const std::string digits = std::to_string(value);
    constexpr int scale = 2;
    const int glyph_w = 3 * scale, glyph_h = 5 * scale, gap = scale;
    const int total_w = static_cast<int>(digits.size()) * (glyph_w + gap) - gap;
    const int top = center_row - glyph_h / 2;
    const int left = center_col - total_w / 2;
    // Dark backing box so the digits stay legible on any texture.
    for (int r = top - 1; r <= top + glyph_h; ++r)
        for (int c = left - 1; c <= left + total_w; ++c) set_rgb(img, r, c, 0.0f, 0.0f, 0.0f);
    for (std::size_t i = 0; i < digits.size(); ++i) {
        const auto& glyph = kDigitGlyphs[digits[i] - '0'];
        const int x0 = left + static_cast<int>(i) * (glyph_w + gap);
        for (int gy = 0; gy < 5; ++gy)
            for (int gx = 0; gx < 3; ++gx)
                if (glyph[gy] & (4 >> gx))
                    for (int sy = 0; sy < scale; ++sy)
                        for (int sx = 0; sx < scale; ++sx)
                            set_rgb(img, top + gy * scale + sy, x0 + gx * scale + sx, 1.0f, 1.0f, 1.0f);
    }
}

}  // namespace

Highlight render_highlight(const Image& image, const Mask& plane_mask, int plane_id, int min_side) {
    if (plane_mask.rows != image.height || plane_mask.cols != image.width)
        throw DataError("highlight mask does not match the image size");
    const BBox bbox = mask_bbox(plane_mask);
    if (bbox.empty()) throw DataError("cannot highlight an empty plane mask");
    if (!bbox.large_enough(min_side)) throw DataError("plane mask bounding box is below the minimum size");

    Highlight out{image, 0, 0, 0};
    Image& img = out.image;
    const int H = image.height, W = image.width;

    // Connected components (4-connectivity) to place the marker.
    Grid<int> comp(H, W, -1);
    std::size_t largest_size = 0;
    double largest_r = 0.0, largest_c = 0.0;
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            if (!plane_mask.at(r, c) || comp.at(r, c) >= 0) continue;
            const int label = out.components++;
            std::queue<std::pair<int, int>> q;
            q.emplace(r, c);
            comp.at(r, c) = label;
            std::size_t size = 0;
            double sr = 0.0, sc = 0.0;
            while (!q.empty()) {
                auto [y, x] = q.front();
                q.pop();
                ++size;
                sr += y;
                sc += x;
                constexpr int dy[4] = {-1, 1, 0, 0}, dx[4] = {0, 0, -1, 1};
                for (int k = 0; k < 4; ++k) {
                    const int ny = y + dy[k], nx = x + dx[k];
                    if (ny < 0 || nx < 0 || ny >= H || nx >= W) continue;
                    if (!plane_mask.at(ny, nx) || comp.at(ny, nx) >= 0) continue;
                    comp.at(ny, nx) = label;
                    q.emplace(ny, nx);
                }
            }
            if (size > largest_size) {
                largest_size = size;
                largest_r = sr / static_cast<double>(size);
                largest_c = sc / static_cast<double>(size);
            }
        }
    }

    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            if (!plane_mask.at(r, c)) continue;
            const bool contour = r == 0 || c == 0 || r == H - 1 || c == W - 1 || !plane_mask.at(r - 1, c) ||
                                 !plane_mask.at(r + 1, c) || !plane_mask.at(r, c - 1) || !plane_mask.at(r, c + 1);
            if (contour) {
                set_rgb(img, r, c, 1.0f, 0.0f, 0.0f);
            } else if (img.channels >= 3) {
                img.at(r, c, 0) = 0.8f * img.at(r, c, 0) + 0.2f;
                img.at(r, c, 1) = 0.8f * img.at(r, c, 1);
                img.at(r, c, 2) = 0.8f * img.at(r, c, 2);
            }
        }
    }

    out.marker_row = static_cast<int>(std::lround(largest_r));
    out.marker_col = static_cast<int>(std::lround(largest_c));
    stamp_number(img, out.marker_row, out.marker_col, plane_id);
    return out;
}

std::string request_hash(const VlmRequest& req) {
    std::string blob = req.prompt;
    blob.push_back('\0');
    blob += req.image_png;
    return sha256_hex(blob);
}

FixtureVlmClient::FixtureVlmClient(std::map<std::string, std::string> transcripts)
    : transcripts_(std::move(transcripts)) {}

FixtureVlmClient FixtureVlmClient::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw DataError("fixture transcript must be a JSON object");
    std::map<std::string, std::string> m;
    for (const auto& [k, v] : j.items()) {
        if (!v.is_string()) throw DataError("fixture response for " + k + " is not a string");
        m.emplace(k, v.get<std::string>());
    }
    return FixtureVlmClient(std::move(m));
}

std::string FixtureVlmClient::complete(const VlmRequest& req) {
    ++queries_;
    const auto it = transcripts_.find(request_hash(req));
    if (it == transcripts_.end())
        throw ServiceError("no recorded response for plane " + std::to_string(req.plane_id) + " request");
    return it->second;
}

namespace {

std::string base64(std::string_view bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

}  // namespace

HttpVlmClient::HttpVlmClient(HttpVlmConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.endpoint.empty()) throw ConfigError("VLM endpoint is empty");
    if (cfg_.timeout_s <= 0) throw ConfigError("VLM timeout must be positive");
}

std::string HttpVlmClient::complete(const VlmRequest& req) {
    // Split "scheme://host:port/prefix" into host part and path prefix.
    std::string base = cfg_.endpoint;
    std::string prefix;
    const auto scheme_end = base.find("://");
    const auto path_start = base.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start != std::string::npos) {
        prefix = base.substr(path_start);
        base = base.substr(0, path_start);
    }
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

    nlohmann::json body;
    body["model"] = cfg_.model;
    body["max_tokens"] = req.max_tokens;
    body["temperature"] = 0;
    body["messages"] = nlohmann::json::array(
        {{{"role", "user"},
          {"content", nlohmann::json::array({{{"type", "image_url"},
                                              {"image_url", {{"url", "data:image/png;base64," + base64(req.image_png)}}}},
                                             {{"type", "text"}, {"text", req.prompt}}})}}});

    httplib::Client cli(base);
    cli.set_connection_timeout(cfg_.timeout_s, 0);
    cli.set_read_timeout(cfg_.timeout_s, 0);
    cli.set_write_timeout(cfg_.timeout_s, 0);
    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

    auto res = cli.Post(prefix + "/v1/chat/completions", headers, body.dump(), "application/json");
    if (!res) throw ServiceError("VLM request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw ServiceError("VLM endpoint returned HTTP " + std::to_string(res->status));
    try {
        const auto j = nlohmann::json::parse(res->body);
        const auto& content = j.at("choices").at(0).at("message").at("content");
        if (content.is_string()) return content.get<std::string>();
        std::string text;
        for (const auto& part : content)
            if (part.value("type", "") == "text") text += part.value("text", "");
        return text;
    } catch (const nlohmann::json::exception& e) {
        throw ServiceError(std::string("malformed VLM response: ") + e.what());
    }
}

namespace {

void tally(ClassificationVerdict& v) {
    std::size_t layout_votes = 0, other_votes = 0;
    std::array<std::size_t, kAllKeywords.size()> counts{};
    for (std::size_t i = 0; i < v.keywords.size(); ++i) {
        if (v.skipped[i]) continue;
        const auto& k = v.keywords[i];
        if (k && is_layout_keyword(*k)) {
            ++layout_votes;
            ++counts[static_cast<std::size_t>(*k)];
        } else {
            ++other_votes;
            if (k) ++counts[static_cast<std::size_t>(*k)];
        }
    }
    v.label = layout_votes > other_votes ? PlaneLabel::layout : PlaneLabel::non_layout;
    v.semantic.reset();
    std::size_t best = 0;
    for (auto k : kAllKeywords) {
        if ((v.label == PlaneLabel::layout) != is_layout_keyword(k)) continue;
        const std::size_t c = counts[static_cast<std::size_t>(k)];
        if (c > best) {
            best = c;
            v.semantic = k;
        }
    }
}

}  // namespace

ClassificationVerdict vote_plane(int plane_id, std::span<const std::optional<std::string>> responses,
                                 std::span<const BBox> bboxes) {
    if (responses.size() != bboxes.size()) throw DataError("one response slot per view bounding box is required");
    ClassificationVerdict v;
    v.plane_id = plane_id;
    for (std::size_t i = 0; i < responses.size(); ++i) {
        const bool skip = !bboxes[i].large_enough();
        v.skipped.push_back(skip);
        if (skip || !responses[i]) {
            v.keywords.emplace_back(std::nullopt);
        } else {
            v.keywords.push_back(parse_response(*responses[i]));
        }
    }
    tally(v);
    return v;
}

ClassificationVerdict classify_plane(int plane_id, std::span<const PlaneView> views, VlmClient& client) {
    ClassificationVerdict v;
    v.plane_id = plane_id;
    const std::string prompt = build_prompt(plane_id);
    for (const auto& view : views) {
        if (!view.bbox.large_enough()) {
            v.skipped.push_back(true);
            v.keywords.emplace_back(std::nullopt);
            continue;
        }
        VlmRequest req{plane_id, view.image_png, prompt, kMaxResponseTokens};
        ++v.queries_issued;
        v.skipped.push_back(false);
        v.keywords.push_back(parse_response(client.complete(req)));
    }
    tally(v);
    return v;
}

HeuristicVerdict heuristic_classify(const Plane& plane, const Vec3& room_up, std::span<const double> camera_heights,
                                    double extent, const HeuristicOptions& opts) {
    if (std::abs(room_up.norm() - 1.0) > 1e-6) throw DataError("room up vector must be unit length");
    const double nu = plane.normal.dot(room_up);
    if (std::abs(nu) > opts.horizontal_cos) {
        if (camera_heights.empty()) return {};
        // Height of the plane along up: points x = h*up satisfy n.x + d = 0.
        const double h = -plane.offset / nu;
        const auto [lo, hi] = std::minmax_element(camera_heights.begin(), camera_heights.end());
        if (h < *lo) return {PlaneLabel::layout, SurfaceKeyword::floor};
        if (h > *hi) return {PlaneLabel::layout, SurfaceKeyword::ceiling};
        return {PlaneLabel::non_layout, SurfaceKeyword::table};
    }
    if (std::abs(nu) < opts.vertical_cos && extent >= opts.min_wall_extent) return {PlaneLabel::layout, SurfaceKeyword::wall};
    return {PlaneLabel::non_layout, SurfaceKeyword::other};
}

}  // namespace anchorpano

#pragma once

#include "anchorpano/core.hpp"
#include "anchorpano/planes.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace anchorpano {

enum class SurfaceKeyword { wall, floor, ceiling, bed, table, shelf, cabinet, window, door, other };

inline constexpr std::array<SurfaceKeyword, 10> kAllKeywords{
    SurfaceKeyword::wall,  SurfaceKeyword::floor,   SurfaceKeyword::ceiling, SurfaceKeyword::bed,
    SurfaceKeyword::table, SurfaceKeyword::shelf,   SurfaceKeyword::cabinet, SurfaceKeyword::window,
    SurfaceKeyword::door,  SurfaceKeyword::other};

const char* to_string(SurfaceKeyword k);
std::optional<SurfaceKeyword> keyword_from_string(std::string_view s);
bool is_layout_keyword(SurfaceKeyword k);

inline constexpr int kMinPlaneBBox = 32;
inline constexpr int kMaxResponseTokens = 200;

/// Chain-of-thought classification prompt with the plane marker substituted.
std::string build_prompt(int plane_id);

/// Keyword whose last occurrence is rightmost in the text. Matching is
/// case-insensitive and requires word boundaries on both sides.
std::optional<SurfaceKeyword> parse_response(std::string_view text);

struct BBox {
    int row_min = 0, col_min = 0, row_max = -1, col_max = -1;  // inclusive
    bool empty() const { return row_max < row_min || col_max < col_min; }
    int height() const { return empty() ? 0 : row_max - row_min + 1; }
    int width() const { return empty() ? 0 : col_max - col_min + 1; }
    /// Both sides at least kMinPlaneBBox.
    bool large_enough(int min_side = kMinPlaneBBox) const { return width() >= min_side && height() >= min_side; }
};

BBox mask_bbox(const Mask& mask);

struct Highlight {
    Image image;
    int marker_row = 0;
    int marker_col = 0;
    int components = 0;
};

/// Tints the plane region, draws a red contour around every connected
/// component and stamps the plane id at the centroid of the largest one.
/// Throws DataError on an empty mask or one whose bounding box is below
/// min_side in either dimension.
Highlight render_highlight(const Image& image, const Mask& plane_mask, int plane_id, int min_side = kMinPlaneBBox);

struct VlmRequest {
    int plane_id = 0;
    std::string image_png;
    std::string prompt;
    int max_tokens = kMaxResponseTokens;
};

/// Stable key for fixture lookup: SHA-256 over prompt and image bytes.
std::string request_hash(const VlmRequest& req);

class VlmClient {
public:
    virtual ~VlmClient() = default;
    /// Returns the raw response text; throws ServiceError on transport failure.
    virtual std::string complete(const VlmRequest& req) = 0;
};

/// Replays recorded transcripts stored as {request_hash: response_text}.
class FixtureVlmClient : public VlmClient {
public:
    explicit FixtureVlmClient(std::map<std::string, std::string> transcripts);
    static FixtureVlmClient from_json(const nlohmann::json& j);

    std::string complete(const VlmRequest& req) override;
    std::size_t queries() const { return queries_; }

private:
    std::map<std::string, std::string> transcripts_;
    std::size_t queries_ = 0;
};

struct HttpVlmConfig {
    std::string endpoint;  // e.g. http://127.0.0.1:8000
    std::string model;
    std::string api_key;  // sent as a bearer token when set
    int timeout_s = 60;
};

/// OpenAI-compatible chat-completions client (image sent as a data URL).
class HttpVlmClient : public VlmClient {
public:
    explicit HttpVlmClient(HttpVlmConfig cfg);
    std::string complete(const VlmRequest& req) override;

private:
    HttpVlmConfig cfg_;
};

struct PlaneView {
    BBox bbox;
    std::string image_png;  // highlighted view; only needed when queried
};

struct ClassificationVerdict {
    int plane_id = 0;
    // One entry per view; absent for skipped views and unparseable responses.
    std::vector<std::optional<SurfaceKeyword>> keywords;
    std::vector<bool> skipped;
    std::size_t queries_issued = 0;
    PlaneLabel label = PlaneLabel::non_layout;
    std::optional<SurfaceKeyword> semantic;
};

/// Majority vote over per-view layout/non-layout labels from already
/// collected responses. Views below the bbox rule are skipped; unparseable
/// responses vote non-layout; ties resolve to non-layout.
ClassificationVerdict vote_plane(int plane_id, std::span<const std::optional<std::string>> responses,
                                 std::span<const BBox> bboxes);

/// Queries the client once per view passing the bbox rule, then votes.
ClassificationVerdict classify_plane(int plane_id, std::span<const PlaneView> views, VlmClient& client);

struct HeuristicOptions {
    double horizontal_cos = 0.9;
    double vertical_cos = 0.2;
    double min_wall_extent = 1.0;
};

struct HeuristicVerdict {
    PlaneLabel label = PlaneLabel::non_layout;
    std::optional<SurfaceKeyword> semantic;
};

/// Offline fallback: horizontal planes below every camera are floors, above
/// every camera ceilings; large vertical planes are walls.
HeuristicVerdict heuristic_classify(const Plane& plane, const Vec3& room_up, std::span<const double> camera_heights,
                                    double extent, const HeuristicOptions& opts = {});

}  // namespace anchorpano

#include "anchorpano/serialize.hpp"

#include <algorithm>
#include <cmath>

namespace anchorpano {

using nlohmann::json;

namespace {

template <typename T>
T field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw DataError(std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw DataError(std::string("bad field '") + key + "': " + e.what());
    }
}

json optional_int(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw DataError("expected a 3-vector");
    Vec3 v;
    for (int a = 0; a < 3; ++a) {
        if (!j[static_cast<std::size_t>(a)].is_number()) throw DataError("3-vector entries must be numbers");
        v[a] = j[static_cast<std::size_t>(a)].get<double>();
    }
    return v;
}

json pose_to_json(const CameraPose& p) {
    json rows = json::array();
    for (int r = 0; r < 3; ++r) rows.push_back(json::array({p.rotation(r, 0), p.rotation(r, 1), p.rotation(r, 2)}));
    return {{"rotation", rows}, {"center", vec3_to_json(p.center)}};
}

CameraPose pose_from_json(const json& j) {
    CameraPose p;
    p.center = vec3_from_json(field<json>(j, "center"));
    if (j.contains("rotation")) {
        const json& rows = j.at("rotation");
        if (!rows.is_array() || rows.size() != 3) throw DataError("rotation must be 3x3");
        for (int r = 0; r < 3; ++r) p.rotation.row(r) = vec3_from_json(rows[static_cast<std::size_t>(r)]).transpose();
    }
    p.validate();
    return p;
}

json planes_to_json(std::span<const Plane> planes) {
    json out = json::array();
    for (const auto& p : planes) {
        out.push_back({{"id", p.id},
                       {"normal", vec3_to_json(p.normal)},
                       {"offset", p.offset},
                       {"label", to_string(p.label)},
                       {"semantic", p.semantic ? json(*p.semantic) : json(nullptr)}});
    }
    return out;
}

std::vector<Plane> planes_from_json(const json& j) {
    if (!j.is_array()) throw DataError("plane set must be a JSON array");
    std::vector<Plane> out;
    for (const auto& e : j) {
        Plane p;
        p.id = field<int>(e, "id");
        p.normal = vec3_from_json(field<json>(e, "normal"));
        p.offset = field<double>(e, "offset");
        p.label = e.contains("label") ? plane_label_from_string(field<std::string>(e, "label")) : PlaneLabel::unknown;
        if (e.contains("semantic") && !e.at("semantic").is_null()) p.semantic = field<std::string>(e, "semantic");
        out.push_back(std::move(p));
    }
    validate_planes(out);
    return out;
}

std::vector<Plane> read_planes(const std::filesystem::path& path) { return planes_from_json(read_json(path)); }

void write_planes(const std::filesystem::path& path, std::span<const Plane> planes) {
    write_json(path, planes_to_json(planes));
}

json assignments_to_json(std::span<const Assignment> assignments, const LatentTokenGrid& grid) {
    json tokens = json::array();
    for (const auto& a : assignments) {
        tokens.push_back({{"index", a.token},
                          {"row", grid.row_of(a.token)},
                          {"col", grid.col_of(a.token)},
                          {"plane_id", optional_int(a.plane_id)},
                          {"confidence", a.confidence},
                          {"c_geo", a.c_geo},
                          {"c_bnd", a.c_bnd},
                          {"geo_plane", optional_int(a.geo_plane)},
                          {"bnd_plane", optional_int(a.bnd_plane)}});
    }
    return {{"grid", {{"rows", grid.rows}, {"cols", grid.cols}, {"patch", grid.patch}}}, {"tokens", tokens}};
}

json steering_config_to_json(const SteeringConfig& cfg) {
    return {{"lambda", cfg.lambda},
            {"layers", std::vector<int>(cfg.layers.begin(), cfg.layers.end())},
            {"tau", cfg.tau},
            {"confidence_floor", cfg.confidence_floor},
            {"mode", to_string(cfg.mode)}};
}

SteeringConfig steering_config_from_json(const json& j, SteeringConfig cfg) {
    if (!j.is_object()) throw ConfigError("steering config must be a JSON object");
    try {
        if (j.contains("lambda")) cfg.lambda = j.at("lambda").get<double>();
        if (j.contains("tau")) cfg.tau = j.at("tau").get<double>();
        if (j.contains("confidence_floor")) cfg.confidence_floor = j.at("confidence_floor").get<double>();
        if (j.contains("mode")) cfg.mode = steering_mode_from_string(j.at("mode").get<std::string>());
        if (j.contains("layers")) {
            const auto layers = j.at("layers").get<std::vector<int>>();
            cfg.layers = std::set<int>(layers.begin(), layers.end());
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad steering config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

json token_sets_to_json(const PlaneTokenSets& sets) {
    json observed = json::object(), holes = json::object();
    for (const auto& [id, toks] : sets.observed) observed[std::to_string(id)] = toks;
    for (const auto& [id, toks] : sets.holes) holes[std::to_string(id)] = toks;
    return {{"observed", observed}, {"holes", holes}};
}

PlaneTokenSets token_sets_from_json(const json& j) {
    PlaneTokenSets sets;
    auto read = [](const json& obj, std::map<int, std::vector<int>>& out) {
        if (!obj.is_object()) throw DataError("token sets must map plane ids to token lists");
        for (const auto& [key, toks] : obj.items()) {
            try {
                out[std::stoi(key)] = toks.get<std::vector<int>>();
            } catch (const std::exception& e) {
                throw DataError("bad token set for plane '" + key + "'");
            }
        }
    };
    read(field<json>(j, "observed"), sets.observed);
    read(field<json>(j, "holes"), sets.holes);
    return sets;
}

json candidate_to_json(const PanoCandidate& c) {
    return {{"index", c.index},   {"pose", pose_to_json(c.pose)},
            {"hole_ratio", c.hole_ratio}, {"new_voxels", c.new_voxels},
            {"layout_planes", c.layout_planes}, {"f", c.f},
            {"g", c.g},           {"score", c.score}};
}

void write_attention_state(const std::filesystem::path& q_path, const std::filesystem::path& k_path,
                           const AttentionState& s) {
    s.validate();
    const std::vector<std::int64_t> shape{s.heads, s.tokens, s.dim};
    write_tensor(q_path, RawTensor::from_f32(shape, s.q));
    write_tensor(k_path, RawTensor::from_f32(shape, s.k));
}

AttentionState read_attention_state(const std::filesystem::path& q_path, const std::filesystem::path& k_path,
                                    int layer, int prefix_tokens) {
    const RawTensor q = read_tensor(q_path), k = read_tensor(k_path);
    if (q.shape.size() != 3 || q.shape != k.shape) throw DataError("Q and K must share a [heads, tokens, dim] shape");
    if (q.dtype != DType::f32 || k.dtype != DType::f32) throw DataError("Q and K must be f32");
    AttentionState s(layer, static_cast<int>(q.shape[0]), static_cast<int>(q.shape[1]), static_cast<int>(q.shape[2]),
                     prefix_tokens);
    s.q = q.as_f32();
    s.k = k.as_f32();
    s.validate();
    return s;
}

PointCloud read_point_cloud(const std::filesystem::path& path) {
    const RawTensor t = read_tensor(path);
    if (t.dtype != DType::f32 || t.shape.size() != 2 || t.shape[1] != 3) throw DataError("point cloud must be f32 N x 3");
    const auto v = t.as_f32();
    PointCloud cloud;
    cloud.points.reserve(static_cast<std::size_t>(t.shape[0]));
    for (std::size_t i = 0; i + 2 < v.size(); i += 3) cloud.points.emplace_back(v[i], v[i + 1], v[i + 2]);
    return cloud;
}

void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
    std::vector<float> v;
    v.reserve(cloud.points.size() * 3);
    for (const auto& p : cloud.points)
        for (int a = 0; a < 3; ++a) v.push_back(static_cast<float>(p[a]));
    write_tensor(path, RawTensor::from_f32({static_cast<std::int64_t>(cloud.points.size()), 3}, v));
}

}  // namespace anchorpano

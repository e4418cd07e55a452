#pragma once

#include "anchorpano/attention_steering.hpp"
#include "anchorpano/erp_geometry.hpp"
#include "anchorpano/hole_assignment.hpp"
#include "anchorpano/io.hpp"
#include "anchorpano/pano_selection.hpp"
#include "anchorpano/planes.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <span>
#include <vector>

namespace anchorpano {

// JSON conversions for the on-disk formats. Readers throw DataError on
// malformed documents.

nlohmann::json vec3_to_json(const Vec3& v);
Vec3 vec3_from_json(const nlohmann::json& j);

nlohmann::json pose_to_json(const CameraPose& p);
CameraPose pose_from_json(const nlohmann::json& j);

nlohmann::json planes_to_json(std::span<const Plane> planes);
std::vector<Plane> planes_from_json(const nlohmann::json& j);
std::vector<Plane> read_planes(const std::filesystem::path& path);
void write_planes(const std::filesystem::path& path, std::span<const Plane> planes);

nlohmann::json assignments_to_json(std::span<const Assignment> assignments, const LatentTokenGrid& grid);

nlohmann::json steering_config_to_json(const SteeringConfig& cfg);
/// Missing keys keep the values already in `base`.
SteeringConfig steering_config_from_json(const nlohmann::json& j, SteeringConfig base = {});

nlohmann::json token_sets_to_json(const PlaneTokenSets& sets);
PlaneTokenSets token_sets_from_json(const nlohmann::json& j);

nlohmann::json candidate_to_json(const PanoCandidate& c);

/// Q/K tensors of shape [heads, tokens, dim] as two raw-tensor files.
void write_attention_state(const std::filesystem::path& q_path, const std::filesystem::path& k_path,
                           const AttentionState& s);
AttentionState read_attention_state(const std::filesystem::path& q_path, const std::filesystem::path& k_path,
                                    int layer, int prefix_tokens);

PointCloud read_point_cloud(const std::filesystem::path& path);
void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud);

}  // namespace anchorpano

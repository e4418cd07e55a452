#pragma once

#include "anchorpano/core.hpp"
#include "anchorpano/hole_assignment.hpp"
#include "anchorpano/planes.hpp"

#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

namespace anchorpano {

/// Query and key matrices of one attention layer, laid out [head][token][dim].
/// The first `prefix_tokens` rows are non-image (text) tokens; image token i
/// lives at sequence row prefix_tokens + i, in row-major token-grid order.
struct AttentionState {
    int layer = 0;
    int heads = 1;
    int tokens = 0;
    int dim = 0;
    int prefix_tokens = 0;
    std::vector<float> q;
    std::vector<float> k;

    AttentionState() = default;
    AttentionState(int layer_index, int num_heads, int num_tokens, int head_dim, int prefix = 0);

    int image_tokens() const { return tokens - prefix_tokens; }
    std::size_t offset(int head, int row) const {
        return (static_cast<std::size_t>(head) * tokens + row) * static_cast<std::size_t>(dim);
    }
    std::span<float> q_row(int head, int row) { return {q.data() + offset(head, row), static_cast<std::size_t>(dim)}; }
    std::span<const float> q_row(int head, int row) const {
        return {q.data() + offset(head, row), static_cast<std::size_t>(dim)};
    }
    std::span<float> k_row(int head, int row) { return {k.data() + offset(head, row), static_cast<std::size_t>(dim)}; }
    std::span<const float> k_row(int head, int row) const {
        return {k.data() + offset(head, row), static_cast<std::size_t>(dim)};
    }
    void validate() const;
};

enum class SteeringMode { both, q_only, k_only };
const char* to_string(SteeringMode m);
SteeringMode steering_mode_from_string(std::string_view s);

/// Default steered blocks: single-stream blocks 10..37.
std::set<int> default_steered_layers();

struct SteeringConfig {
    double lambda = 0.4;
    std::set<int> layers = default_steered_layers();
    double tau = 0.5;
    double confidence_floor = 0.05;
    SteeringMode mode = SteeringMode::both;

    void validate() const;
};

/// Per-plane observed (O_g) and hole (H_g) image-token sets.
struct PlaneTokenSets {
    std::map<int, std::vector<int>> observed;
    std::map<int, std::vector<int>> holes;

    /// Throws DataError on out-of-range tokens, a hole token claimed by two
    /// planes, or a token that is both observed and hole.
    void validate(int image_tokens) const;
    std::optional<int> hole_plane(int token) const;
};

/// O_g from observed tokens on layout planes; H_g from assigned hole tokens
/// whose fused confidence reaches the floor.
PlaneTokenSets build_token_sets(const LatentTokenGrid& grid, std::span<const Assignment> assignments,
                                std::span<const Plane> planes, double confidence_floor);

/// Mean key over the given image tokens for one head.
std::vector<double> plane_centroid(const AttentionState& state, int head, std::span<const int> tokens);

/// Steering is active on listed layers while t > tau (strict).
bool gate(int layer, double t, const SteeringConfig& cfg);

/// q_i += lambda*kbar_g for i in H_g and k_j += lambda*kbar_g for j in O_g,
/// with centroids taken from the incoming keys and applied to every head.
/// Identity when the gate is closed or lambda is 0.
AttentionState apply_steering(const AttentionState& state, const SteeringConfig& cfg, const PlaneTokenSets& sets,
                              double t);

/// apply_steering restricted to one side (or both).
AttentionState steer_variant(const AttentionState& state, const SteeringConfig& cfg, const PlaneTokenSets& sets,
                             double t, SteeringMode mode);

/// Uniform sample (without replacement) of up to `count` hole tokens in H sets.
/// Only planes that also have observed tokens contribute, since a plane
/// without a centroid has no affinity to measure.
std::vector<int> sample_hole_tokens(const PlaneTokenSets& sets, std::size_t count, std::uint64_t seed);

/// Mean over S of (q_i . kbar_same) / (q_i . kbar_other + eps) with the other
/// plane drawn uniformly per token. Dot products run over all heads. Absent
/// when fewer than two planes have observed tokens.
std::optional<double> affinity_ratio(const AttentionState& state, std::span<const int> sample,
                                     const PlaneTokenSets& sets, double eps, std::uint64_t seed);

inline constexpr double kSteerableAffinity = 1.5;

struct AttentionMass {
    std::map<int, double> per_plane;  // softmax mass on O_g
    double remainder = 0.0;           // everything else, incl. prefix tokens
};

/// softmax(q . K / sqrt(d)) for one query row of one head, summed per O_g.
AttentionMass attention_mass_report(const AttentionState& state, int head, int query_token,
                                    const PlaneTokenSets& sets);

}  // namespace anchorpano

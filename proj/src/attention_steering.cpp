#include "anchorpano/attention_steering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace anchorpano {

AttentionState::AttentionState(int layer_index, int num_heads, int num_tokens, int head_dim, int prefix)
    : layer(layer_index), heads(num_heads), tokens(num_tokens), dim(head_dim), prefix_tokens(prefix),
      q(static_cast<std::size_t>(num_heads) * num_tokens * head_dim, 0.0f),
      k(static_cast<std::size_t>(num_heads) * num_tokens * head_dim, 0.0f) {
    validate();
}

void AttentionState::validate() const {
    if (heads <= 0 || tokens < 0 || dim <= 0) throw DataError("attention state dimensions must be positive");
    if (prefix_tokens < 0 || prefix_tokens > tokens) throw DataError("prefix token count out of range");
    const std::size_t n = static_cast<std::size_t>(heads) * tokens * dim;
    if (q.size() != n || k.size() != n) throw DataError("Q and K must both have shape [heads, tokens, dim]");
}

const char* to_string(SteeringMode m) {
    switch (m) {
        case SteeringMode::both: return "both";
        case SteeringMode::q_only: return "q_only";
        case SteeringMode::k_only: return "k_only";
    }
    return "both";
}

SteeringMode steering_mode_from_string(std::string_view s) {
    if (s == "both") return SteeringMode::both;
    if (s == "q_only") return SteeringMode::q_only;
    if (s == "k_only") return SteeringMode::k_only;
    throw ConfigError("unknown steering mode '" + std::string(s) + "'");
}

std::set<int> default_steered_layers() {
    std::set<int> s;
    for (int l = 10; l <= 37; ++l) s.insert(l);
    return s;
}

void SteeringConfig::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("steering strength must be >= 0");
    if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("timestep threshold must lie in (0, 1)");
    if (!(confidence_floor >= 0.0)) throw ConfigError("confidence floor must be >= 0");
}

void PlaneTokenSets::validate(int image_tokens) const {
    std::vector<int> owner(static_cast<std::size_t>(std::max(image_tokens, 0)), 0);
    constexpr int kObserved = 1, kHole = 2;
    auto check = [&](int t) {
        if (t < 0 || t >= image_tokens) throw DataError("token " + std::to_string(t) + " outside the image grid");
    };
    for (const auto& [g, toks] : observed)
        for (int t : toks) {
            check(t);
            owner[static_cast<std::size_t>(t)] |= kObserved;
        }
    for (const auto& [g, toks] : holes)
        for (int t : toks) {
            check(t);
            auto& o = owner[static_cast<std::size_t>(t)];
            if (o & kHole) throw DataError("hole token " + std::to_string(t) + " assigned to more than one plane");
            if (o & kObserved) throw DataError("token " + std::to_string(t) + " is both observed and hole");
            o |= kHole;
        }
}

std::optional<int> PlaneTokenSets::hole_plane(int token) const {
    for (const auto& [g, toks] : holes)
        if (std::find(toks.begin(), toks.end(), token) != toks.end()) return g;
    return std::nullopt;
}

PlaneTokenSets build_token_sets(const LatentTokenGrid& grid, std::span<const Assignment> assignments,
                                std::span<const Plane> planes, double confidence_floor) {
    PlaneTokenSets sets;
    auto is_layout = [&](int id) {
        const Plane* p = find_plane(planes, id);
        return p && p->is_layout();
    };
    for (int i = 0; i < grid.count(); ++i) {
        const int id = grid.plane_id[static_cast<std::size_t>(i)];
        if (!grid.is_hole(i) && id != kNoPlane && is_layout(id)) sets.observed[id].push_back(i);
    }
    for (const auto& a : assignments) {
        if (!a.plane_id || a.confidence < confidence_floor || !is_layout(*a.plane_id)) continue;
        sets.holes[*a.plane_id].push_back(a.token);
    }
    for (auto& [g, toks] : sets.holes) std::sort(toks.begin(), toks.end());
    sets.validate(grid.count());
    return sets;
}

std::vector<double> plane_centroid(const AttentionState& state, int head, std::span<const int> tokens) {
    if (tokens.empty()) throw DataError("centroid of an empty token set");
    std::vector<double> c(static_cast<std::size_t>(state.dim), 0.0);
    for (int t : tokens) {
        const auto row = state.k_row(head, state.prefix_tokens + t);
        for (int d = 0; d < state.dim; ++d) c[static_cast<std::size_t>(d)] += row[static_cast<std::size_t>(d)];
    }
    for (auto& v : c) v /= static_cast<double>(tokens.size());
    return c;
}

bool gate(int layer, double t, const SteeringConfig& cfg) { return cfg.layers.contains(layer) && t > cfg.tau; }

AttentionState steer_variant(const AttentionState& state, const SteeringConfig& cfg, const PlaneTokenSets& sets,
                             double t, SteeringMode mode) {
    state.validate();
    cfg.validate();
    sets.validate(state.image_tokens());
    AttentionState out = state;
    if (!gate(state.layer, t, cfg) || cfg.lambda == 0.0) return out;

    const bool shift_q = mode != SteeringMode::k_only;
    const bool shift_k = mode != SteeringMode::q_only;
    for (int h = 0; h < state.heads; ++h) {
        for (const auto& [g, observed] : sets.observed) {
            if (observed.empty()) continue;
            // Centroid from the incoming keys, so Q and K shifts see the same anchor.
            const auto centroid = plane_centroid(state, h, observed);
            auto shift = [&](std::span<float> row) {
                for (int d = 0; d < state.dim; ++d) {
                    const auto di = static_cast<std::size_t>(d);
                    row[di] = static_cast<float>(static_cast<double>(row[di]) + cfg.lambda * centroid[di]);
                }
            };
            if (shift_k)
                for (int j : observed) shift(out.k_row(h, state.prefix_tokens + j));
            if (shift_q) {
                const auto it = sets.holes.find(g);
                if (it != sets.holes.end())
                    for (int i : it->second) shift(out.q_row(h, state.prefix_tokens + i));
            }
        }
    }
    return out;
}

AttentionState apply_steering(const AttentionState& state, const SteeringConfig& cfg, const PlaneTokenSets& sets,
                              double t) {
    return steer_variant(state, cfg, sets, t, cfg.mode);
}

std::vector<int> sample_hole_tokens(const PlaneTokenSets& sets, std::size_t count, std::uint64_t seed) {
    std::vector<int> all;
    for (const auto& [g, toks] : sets.holes) {
        const auto obs = sets.observed.find(g);
        if (obs != sets.observed.end() && !obs->second.empty()) all.insert(all.end(), toks.begin(), toks.end());
    }
    std::sort(all.begin(), all.end());
    std::mt19937_64 rng(seed);
    std::shuffle(all.begin(), all.end(), rng);
    if (all.size() > count) all.resize(count);
    std::sort(all.begin(), all.end());
    return all;
}

std::optional<double> affinity_ratio(const AttentionState& state, std::span<const int> sample,
                                     const PlaneTokenSets& sets, double eps, std::uint64_t seed) {
    state.validate();
    if (!(eps > 0.0)) throw ConfigError("epsilon must be positive");
    if (sample.empty()) throw DataError("affinity sample is empty");

    std::map<int, std::vector<std::vector<double>>> centroids;  // plane -> per-head centroid
    for (const auto& [g, toks] : sets.observed) {
        if (toks.empty()) continue;
        auto& per_head = centroids[g];
        for (int h = 0; h < state.heads; ++h) per_head.push_back(plane_centroid(state, h, toks));
    }
    if (centroids.size() < 2) return std::nullopt;

    std::map<int, int> token_plane;
    for (const auto& [g, toks] : sets.holes)
        for (int t : toks) token_plane[t] = g;

    auto dot = [&](int token, const std::vector<std::vector<double>>& c) {
        double s = 0.0;
        for (int h = 0; h < state.heads; ++h) {
            const auto q = state.q_row(h, state.prefix_tokens + token);
            for (int d = 0; d < state.dim; ++d)
                s += static_cast<double>(q[static_cast<std::size_t>(d)]) *
                     c[static_cast<std::size_t>(h)][static_cast<std::size_t>(d)];
        }
        return s;
    };

    std::mt19937_64 rng(seed);
    double total = 0.0;
    for (int i : sample) {
        const auto it = token_plane.find(i);
        if (it == token_plane.end()) throw DataError("sampled token " + std::to_string(i) + " has no assigned plane");
        const auto same = centroids.find(it->second);
        if (same == centroids.end())
            throw DataError("plane " + std::to_string(it->second) + " has no observed tokens");
        std::vector<int> others;
        for (const auto& [g, c] : centroids)
            if (g != it->second) others.push_back(g);
        std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
        const int other = others[pick(rng)];
        total += dot(i, same->second) / (dot(i, centroids.at(other)) + eps);
    }
    return total / static_cast<double>(sample.size());
}

AttentionMass attention_mass_report(const AttentionState& state, int head, int query_token,
                                    const PlaneTokenSets& sets) {
    state.validate();
    if (head < 0 || head >= state.heads) throw DataError("head index out of range");
    if (query_token < 0 || query_token >= state.image_tokens()) throw DataError("query token out of range");
    const auto q = state.q_row(head, state.prefix_tokens + query_token);
    const double scale = 1.0 / std::sqrt(static_cast<double>(state.dim));
    std::vector<double> logits(static_cast<std::size_t>(state.tokens));
    for (int j = 0; j < state.tokens; ++j) {
        const auto kr = state.k_row(head, j);
        double s = 0.0;
        for (int d = 0; d < state.dim; ++d)
            s += static_cast<double>(q[static_cast<std::size_t>(d)]) * kr[static_cast<std::size_t>(d)];
        logits[static_cast<std::size_t>(j)] = s * scale;
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (auto& l : logits) {
        l = std::exp(l - mx);
        z += l;
    }
    AttentionMass out;
    double assigned = 0.0;
    for (const auto& [g, toks] : sets.observed) {
        double m = 0.0;
        for (int t : toks) m += logits[static_cast<std::size_t>(state.prefix_tokens + t)] / z;
        out.per_plane[g] = m;
        assigned += m;
    }
    out.remainder = std::max(0.0, 1.0 - assigned);
    return out;
}

}  // namespace anchorpano

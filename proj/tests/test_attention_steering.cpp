#include "anchorpano/attention_steering.hpp"

#include "attention_fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <set>

using namespace anchorpano;

namespace {

AttentionState random_state(int heads, int tokens, int dim, int prefix, std::uint64_t seed) {
    AttentionState s(30, heads, tokens, dim, prefix);
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> n(0.0f, 1.0f);
    for (auto& v : s.q) v = n(rng);
    for (auto& v : s.k) v = n(rng);
    return s;
}

bool same_bytes(const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

bool row_equal(std::span<const float> a, std::span<const float> b) {
    return std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

PlaneTokenSets small_sets() {
    PlaneTokenSets s;
    s.observed[0] = {0, 1, 2};
    s.observed[3] = {5, 6};
    s.holes[0] = {3, 4};
    s.holes[3] = {7};
    return s;
}

}  // namespace

TEST_CASE("gate") {
    SteeringConfig cfg;
    CHECK_FALSE(gate(5, 0.9, cfg));
    CHECK(gate(20, 0.9, cfg));
    CHECK_FALSE(gate(20, 0.5, cfg));
    CHECK(gate(10, 0.51, cfg));
    CHECK(gate(37, 0.51, cfg));
    CHECK_FALSE(gate(38, 0.99, cfg));
    CHECK(cfg.layers.size() == 28);
}

TEST_CASE("config validation") {
    SteeringConfig cfg;
    cfg.lambda = -0.1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.lambda = 0.4;
    cfg.tau = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK_THROWS_AS(steering_mode_from_string("sideways"), ConfigError);
    CHECK(steering_mode_from_string("k_only") == SteeringMode::k_only);
}

TEST_CASE("centroids") {
    AttentionState s(20, 1, 4, 2, 1);
    auto set_k = [&](int t, std::vector<float> v) { std::copy(v.begin(), v.end(), s.k_row(0, 1 + t).begin()); };
    set_k(0, {1, 0});
    set_k(1, {0, 1});
    set_k(2, {1, 1});
    const std::vector<int> both{0, 1};
    const auto c = plane_centroid(s, 0, both);
    CHECK(c[0] == 0.5);
    CHECK(c[1] == 0.5);
    CHECK_THROWS_AS(plane_centroid(s, 0, {}), DataError);

    const auto big = random_state(1, 100, 8, 0, 9);
    std::vector<int> all(100);
    for (int i = 0; i < 100; ++i) all[static_cast<std::size_t>(i)] = i;
    const auto m = plane_centroid(big, 0, all);
    for (int d = 0; d < 8; ++d) {
        long double sum = 0;
        for (int i = 0; i < 100; ++i) sum += big.k_row(0, i)[static_cast<std::size_t>(d)];
        CHECK(std::abs(m[static_cast<std::size_t>(d)] - static_cast<double>(sum / 100)) < 1e-12);
    }
}

TEST_CASE("lambda zero and a closed gate are bit-identical identities") {
    const auto s = random_state(3, 12, 8, 2, 1);
    const auto sets = small_sets();
    SteeringConfig cfg;
    cfg.lambda = 0.0;
    auto out = apply_steering(s, cfg, sets, 0.9);
    CHECK(same_bytes(out.q, s.q));
    CHECK(same_bytes(out.k, s.k));

    cfg.lambda = 0.4;
    out = apply_steering(s, cfg, sets, 0.5);  // t == tau
    CHECK(same_bytes(out.q, s.q));
    CHECK(same_bytes(out.k, s.k));
    AttentionState early = s;
    early.layer = 3;
    out = apply_steering(early, cfg, sets, 0.99);
    CHECK(same_bytes(out.q, early.q));
    CHECK(same_bytes(out.k, early.k));
}

TEST_CASE("only hole query rows and observed key rows change") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto s = random_state(2, 12, 6, 2, seed);
        const auto sets = small_sets();
        SteeringConfig cfg;
        const auto out = apply_steering(s, cfg, sets, 0.8);
        std::set<int> h_rows, o_rows;
        for (const auto& [g, t] : sets.holes) h_rows.insert(t.begin(), t.end());
        for (const auto& [g, t] : sets.observed) o_rows.insert(t.begin(), t.end());
        for (int head = 0; head < 2; ++head)
            for (int row = 0; row < s.tokens; ++row) {
                const int image = row - s.prefix_tokens;
                CHECK(row_equal(out.q_row(head, row), s.q_row(head, row)) == !h_rows.contains(image));
                CHECK(row_equal(out.k_row(head, row), s.k_row(head, row)) == !o_rows.contains(image));
            }
    }
}

TEST_CASE("shift arithmetic uses pre-steering centroids") {
    const auto s = random_state(2, 12, 4, 2, 4);
    const auto sets = small_sets();
    SteeringConfig cfg;
    cfg.lambda = 0.7;
    const auto out = apply_steering(s, cfg, sets, 0.9);
    for (int h = 0; h < 2; ++h)
        for (const auto& [g, obs] : sets.observed) {
            std::vector<double> c(4, 0.0);
            for (int t : obs)
                for (int d = 0; d < 4; ++d) c[static_cast<std::size_t>(d)] += s.k_row(h, 2 + t)[static_cast<std::size_t>(d)];
            for (auto& v : c) v /= static_cast<double>(obs.size());
            for (int t : obs)
                for (int d = 0; d < 4; ++d)
                    CHECK(out.k_row(h, 2 + t)[static_cast<std::size_t>(d)] ==
                          doctest::Approx(s.k_row(h, 2 + t)[static_cast<std::size_t>(d)] + 0.7 * c[static_cast<std::size_t>(d)]));
            for (int t : sets.holes.at(g))
                for (int d = 0; d < 4; ++d)
                    CHECK(out.q_row(h, 2 + t)[static_cast<std::size_t>(d)] ==
                          doctest::Approx(s.q_row(h, 2 + t)[static_cast<std::size_t>(d)] + 0.7 * c[static_cast<std::size_t>(d)]));
        }
}

TEST_CASE("steering variants") {
    const auto s = random_state(2, 12, 4, 2, 6);
    const auto sets = small_sets();
    SteeringConfig cfg;
    const auto both = apply_steering(s, cfg, sets, 0.9);
    const auto q_only = steer_variant(s, cfg, sets, 0.9, SteeringMode::q_only);
    const auto k_only = steer_variant(s, cfg, sets, 0.9, SteeringMode::k_only);
    CHECK(same_bytes(q_only.k, s.k));
    CHECK(same_bytes(q_only.q, both.q));
    CHECK(same_bytes(k_only.q, s.q));
    CHECK(same_bytes(k_only.k, both.k));
    const auto explicit_both = steer_variant(s, cfg, sets, 0.9, SteeringMode::both);
    CHECK(same_bytes(explicit_both.q, both.q));
    CHECK(same_bytes(explicit_both.k, both.k));
}

TEST_CASE("token set validation") {
    PlaneTokenSets s = small_sets();
    CHECK_NOTHROW(s.validate(8));
    CHECK_THROWS_AS(s.validate(7), DataError);
    s.holes[0].push_back(7);  // also claimed by plane 3
    CHECK_THROWS_AS(s.validate(8), DataError);
    PlaneTokenSets t = small_sets();
    t.holes[0].push_back(1);  // observed elsewhere
    CHECK_THROWS_AS(t.validate(8), DataError);
    CHECK(small_sets().hole_plane(7) == 3);
    CHECK_FALSE(small_sets().hole_plane(0).has_value());
}

TEST_CASE("token sets from assignments respect the confidence floor and layout labels") {
    LatentTokenGrid g(2, 4, 1);
    g.plane_id = {0, 0, 1, 2, kNoPlane, kNoPlane, kNoPlane, 0};
    for (int i : {4, 5, 6}) g.status[static_cast<std::size_t>(i)] = TokenStatus::hole;
    std::vector<Plane> planes{{0, Vec3::UnitY(), 1, PlaneLabel::layout, {}},
                              {1, Vec3::UnitX(), 1, PlaneLabel::layout, {}},
                              {2, Vec3::UnitY(), 0.2, PlaneLabel::non_layout, {}}};
    std::vector<Assignment> a(3);
    a[0] = {4, 0, 0.5, 0.5, 0.5, 0, 0};
    a[1] = {5, 1, 0.04, 0.04, 0.04, 1, 1};
    a[2] = {6, std::nullopt, 0, 0, 0, {}, {}};
    const auto sets = build_token_sets(g, a, planes, 0.05);
    CHECK(sets.observed.at(0) == std::vector<int>{0, 1, 7});
    CHECK(sets.observed.at(1) == std::vector<int>{2});
    CHECK_FALSE(sets.observed.contains(2));
    CHECK(sets.holes.at(0) == std::vector<int>{4});
    CHECK_FALSE(sets.holes.contains(1));
}

TEST_CASE("affinity ratio") {
    SUBCASE("hand example") {
        AttentionState s(20, 1, 5, 2, 0);
        auto put = [](std::span<float> row, std::vector<float> v) { std::copy(v.begin(), v.end(), row.begin()); };
        put(s.q_row(0, 0), {1, 0});
        put(s.k_row(0, 1), {1, 0});
        put(s.k_row(0, 2), {0.5f, 0.5f});
        PlaneTokenSets sets;
        sets.observed[0] = {1};
        sets.observed[1] = {2};
        sets.holes[0] = {0};
        const std::vector<int> sample{0};
        CHECK(*affinity_ratio(s, sample, sets, 1e-6, 1) == doctest::Approx(2.0).epsilon(1e-5));
        // Identical centroids give 1.
        put(s.k_row(0, 2), {1, 0});
        CHECK(*affinity_ratio(s, sample, sets, 1e-6, 1) == doctest::Approx(1.0).epsilon(1e-5));
        // One plane only: no ratio.
        sets.observed.erase(1);
        CHECK_FALSE(affinity_ratio(s, sample, sets, 1e-6, 1).has_value());
    }
    SUBCASE("aligned states are steerable, shuffled ones are not") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto aligned = fixtures::aligned_state(4, 16, 2, seed);
            const auto sample = sample_hole_tokens(aligned.sets, 64, seed);
            CHECK(*affinity_ratio(aligned.state, sample, aligned.sets, 1e-6, seed) > kSteerableAffinity);
            const auto shuffled = fixtures::shuffled_state(4, 16, 2, seed);
            const double r = *affinity_ratio(shuffled.state, sample, shuffled.sets, 1e-6, seed);
            CHECK(r > 0.8);
            CHECK(r < 1.2);
        }
    }
    SUBCASE("deterministic for a fixed seed") {
        const auto a = fixtures::aligned_state(3, 8, 1, 2);
        const auto sample = sample_hole_tokens(a.sets, 30, 5);
        CHECK(sample == sample_hole_tokens(a.sets, 30, 5));
        CHECK(*affinity_ratio(a.state, sample, a.sets, 1e-6, 7) == *affinity_ratio(a.state, sample, a.sets, 1e-6, 7));
    }
    SUBCASE("unassigned sample tokens are rejected") {
        const auto a = fixtures::aligned_state(3, 8, 1, 2);
        const std::vector<int> bad{0};  // an observed token
        CHECK_THROWS_AS(affinity_ratio(a.state, bad, a.sets, 1e-6, 1), DataError);
    }
}

TEST_CASE("attention mass") {
    SUBCASE("uniform keys spread mass by set size") {
        AttentionState s(20, 1, 10, 3, 2);
        for (auto& v : s.k) v = 0.5f;
        for (auto& v : s.q) v = 1.0f;
        PlaneTokenSets sets;
        sets.observed[0] = {0, 1, 2};
        sets.observed[1] = {3};
        const auto m = attention_mass_report(s, 0, 5, sets);
        CHECK(m.per_plane.at(0) == doctest::Approx(0.3));
        CHECK(m.per_plane.at(1) == doctest::Approx(0.1));
        CHECK(m.remainder == doctest::Approx(0.6));
    }
    SUBCASE("a dominant key takes the mass") {
        AttentionState s(20, 1, 6, 2, 0);
        s.q_row(0, 0)[0] = 10.0f;
        s.k_row(0, 4)[0] = 10.0f;
        PlaneTokenSets sets;
        sets.observed[2] = {4};
        CHECK(attention_mass_report(s, 0, 0, sets).per_plane.at(2) > 0.999);
    }
    SUBCASE("orthonormal construction: assigned mass strictly increases") {
        for (double lambda : {0.1, 0.4, 1.0}) {
            SteeringConfig cfg;
            cfg.lambda = lambda;
            for (std::uint64_t seed = 0; seed < 25; ++seed) {
                const auto fx = fixtures::orthonormal_state(3, 8, 2, 2, seed);
                const auto out = apply_steering(fx.state, cfg, fx.sets, 0.9);
                for (const auto& [g, holes] : fx.sets.holes)
                    for (int i : holes)
                        for (int h = 0; h < 2; ++h) {
                            const double before = attention_mass_report(fx.state, h, i, fx.sets).per_plane.at(g);
                            const double after = attention_mass_report(out, h, i, fx.sets).per_plane.at(g);
                            CHECK(after > before);
                        }
            }
        }
    }
}

TEST_CASE("hole sampling skips planes without observed tokens") {
    PlaneTokenSets sets;
    sets.observed[0] = {0, 1};
    sets.observed[1] = {};
    sets.holes[0] = {2, 3};
    sets.holes[1] = {4};
    sets.holes[2] = {5, 6};
    for (std::uint64_t seed = 0; seed < 10; ++seed) CHECK(sample_hole_tokens(sets, 10, seed) == std::vector<int>{2, 3});
    sets.observed.erase(0);
    CHECK(sample_hole_tokens(sets, 10, 1).empty());
}

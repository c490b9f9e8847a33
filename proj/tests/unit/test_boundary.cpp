#include <cmath>
#include <map>
#include <random>

#include <doctest.h>

#include "outskirt/boundary.hpp"
#include "outskirt/error.hpp"

using namespace outskirt;
using namespace outskirt::boundary;

namespace {

LatentCatalog catalog_of(const std::vector<std::vector<double>>& means, double sigma = 1.0) {
    LatentCatalog q;
    for (const auto& m : means) {
        const auto d = static_cast<Eigen::Index>(m.size());
        q.entries.push_back({Eigen::Map<const Eigen::VectorXd>(m.data(), d), Eigen::VectorXd::Constant(d, sigma)});
    }
    return q;
}

LatentCatalog random_catalog(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 e(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> sig(0.1, 1.0);
    LatentCatalog q;
    for (std::size_t i = 0; i < n; ++i) {
        GaussianParams p{Eigen::VectorXd(d), Eigen::VectorXd(d)};
        for (std::size_t k = 0; k < d; ++k) {
            p.mu[static_cast<Eigen::Index>(k)] = normal(e) * (1.0 + static_cast<double>(k));
            p.sigma[static_cast<Eigen::Index>(k)] = sig(e);
        }
        q.entries.push_back(p);
    }
    return q;
}

// Independent evaluation of both rules straight from the definitions.
std::vector<std::size_t> brute_force(Selector rule, const LatentCatalog& q, double alpha) {
    const auto n = static_cast<double>(q.size());
    const auto d = q.dim();
    std::vector<double> mean(d, 0.0), var(d, 0.0);
    std::vector<double> norms;
    for (const auto& e : q.entries) {
        double sq = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            mean[k] += e.mu[static_cast<Eigen::Index>(k)] / n;
            sq += e.mu[static_cast<Eigen::Index>(k)] * e.mu[static_cast<Eigen::Index>(k)];
        }
        norms.push_back(std::sqrt(sq));
    }
    for (const auto& e : q.entries)
        for (std::size_t k = 0; k < d; ++k) var[k] += std::pow(e.mu[static_cast<Eigen::Index>(k)] - mean[k], 2) / (n - 1);
    double nm = 0.0, nv = 0.0;
    for (double v : norms) nm += v / n;
    for (double v : norms) nv += (v - nm) * (v - nm) / (n - 1);

    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < q.size(); ++i) {
        bool in = false;
        if (rule == Selector::ellipsoid) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k)
                s += std::pow(q.entries[i].mu[static_cast<Eigen::Index>(k)] - mean[k], 2) / (alpha * var[k]);
            in = s >= 1.0;
        } else {
            in = std::abs(norms[i] - nm) >= alpha * std::sqrt(nv);
        }
        if (in) out.push_back(i);
    }
    return out;
}

MetaStats unit_stats(std::size_t d) {
    MetaStats s;
    s.mu_bar = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    s.sigma_bar_sq = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(d));
    s.n = 10;
    return s;
}

}  // namespace

TEST_CASE("meta_stats: small catalogs") {
    auto s = meta_stats(catalog_of({{0, 0}, {2, 2}}));
    CHECK(s.mu_bar == Eigen::Vector2d(1, 1));
    CHECK(s.sigma_bar_sq == Eigen::Vector2d(2, 2));
    CHECK(s.n == 2);

    s = meta_stats(catalog_of({{0}, {1}, {2}}));
    CHECK(s.mu_bar[0] == 1.0);
    CHECK(s.sigma_bar_sq[0] == 1.0);

    // norms {1, 1, 3}
    const auto l2 = meta_stats(catalog_of({{1, 0}, {0, 1}, {3, 0}}));
    CHECK(l2.mu_bar_l2 == doctest::Approx(5.0 / 3.0));
    CHECK(l2.sigma_bar_l2 * l2.sigma_bar_l2 == doctest::Approx(4.0 / 3.0));
}

TEST_CASE("meta_stats: errors") {
    CHECK_THROWS_AS(meta_stats(catalog_of({{1, 2}})), DataError);
    try {
        meta_stats(catalog_of({{1, 0}, {2, 0}, {3, 0}}));
        FAIL("expected a degenerate-axis error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("axis 1") != std::string::npos);
    }
}

TEST_CASE("ellipsoid rule: boundary cases") {
    const auto s = unit_stats(2);
    CHECK(ellipsoid_member(Eigen::Vector2d(1, 0), s, 1.0));
    CHECK(!ellipsoid_member(Eigen::Vector2d(1, 0), s, 4.0));
}

TEST_CASE("l2 rule: norms {1,1,3}") {
    const auto q = catalog_of({{1, 0}, {0, 1}, {3, 0}});
    const auto s = meta_stats(q);
    const auto o = select_l2(q, s, 1.0);
    REQUIRE(o.size() == 1);
    CHECK(o.selected[0].index == 2);
    CHECK(o.rule == Selector::l2);

    // tiny alpha selects every entry whose norm differs from the mean norm
    CHECK(select_l2(q, s, 1e-9).size() == 3);
}

TEST_CASE("empty selection is an explicit error") {
    const auto q = catalog_of({{1, 0}, {0, 1}, {3, 0}});
    const auto s = meta_stats(q);
    try {
        select_l2(q, s, 10.0);
        FAIL("expected EmptyOutskirtError");
    } catch (const EmptyOutskirtError& e) {
        CHECK(std::string(e.what()).find("alpha") != std::string::npos);
    }
    CHECK_THROWS_AS(select_ellipsoid(q, s, 100.0), EmptyOutskirtError);
    CHECK(member_indices(Selector::l2, q, s, 10.0).empty());
}

TEST_CASE("selectors agree with a brute-force re-evaluation") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto q = random_catalog(50, 1 + seed % 4, seed);
        const auto s = meta_stats(q);
        for (auto rule : {Selector::ellipsoid, Selector::l2}) {
            for (double alpha : {0.5, 1.0, 1.5, 2.0}) {
                const auto expected = brute_force(rule, q, alpha);
                CHECK(member_indices(rule, q, s, alpha) == expected);
                if (expected.empty()) continue;
                const auto o = select(rule, q, s, alpha);
                REQUIRE(o.size() == expected.size());
                for (std::size_t i = 0; i < o.size(); ++i) {
                    CHECK(o.selected[i].index == expected[i]);
                    CHECK(o.selected[i].params == q.entries[expected[i]]);
                    CHECK(is_member(rule, o.selected[i].params.mu, o.stats, o.alpha));
                }
            }
        }
    }
}

TEST_CASE("selection shrinks as alpha grows") {
    const auto q = random_catalog(200, 3, 77);
    const auto s = meta_stats(q);
    for (auto rule : {Selector::ellipsoid, Selector::l2}) {
        auto prev = member_indices(rule, q, s, 0.25);
        for (double alpha = 0.5; alpha <= 4.0; alpha += 0.25) {
            const auto cur = member_indices(rule, q, s, alpha);
            CHECK(std::includes(prev.begin(), prev.end(), cur.begin(), cur.end()));
            prev = cur;
        }
    }
}

TEST_CASE("direction_signs") {
    const auto s = unit_stats(2);
    CHECK(direction_signs({Eigen::Vector2d(2, -1), Eigen::Vector2d(1, 1)}, s) == Eigen::Vector2d(1, -1));
    CHECK(direction_signs({Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1)}, s) == Eigen::Vector2d(1, 1));
    CHECK(direction_signs({Eigen::Vector2d(-2, 1), Eigen::Vector2d(1, 1)}, s) == Eigen::Vector2d(-1, 1));
}

TEST_CASE("synthesize: deterministic example") {
    OutskirtSet o;
    o.stats = unit_stats(2);
    o.selected.push_back({0, {Eigen::Vector2d(2, 0), Eigen::Vector2d(1, 1)}});
    SynthesisConfig cfg;
    cfg.beta = 2.0;
    cfg.noise = Noise::deterministic_one;
    cfg.count = 3;
    const auto y = synthesize(o, cfg);
    REQUIRE(y.points.rows() == 3);
    for (Eigen::Index r = 0; r < 3; ++r) CHECK(y.points.row(r) == Eigen::RowVector2d(4, 2));
}

TEST_CASE("synthesize: count, generators and directional property") {
    const auto q = random_catalog(300, 3, 5);
    const auto s = meta_stats(q);
    const auto o = select_ellipsoid(q, s, 1.5);
    REQUIRE(!o.empty());

    for (auto noise : {Noise::half_normal, Noise::deterministic_one}) {
        SynthesisConfig cfg;
        cfg.beta = 1.5;
        cfg.noise = noise;
        cfg.count = 10000;
        cfg.seed = 11;
        const auto y = synthesize(o, cfg);
        REQUIRE(y.points.rows() == 10000);
        REQUIRE(y.generator.size() == 10000);

        std::map<std::size_t, Eigen::RowVectorXd> first;
        std::size_t violations = 0;
        for (Eigen::Index r = 0; r < y.points.rows(); ++r) {
            const auto& mu = q.entries[y.generator[static_cast<std::size_t>(r)]].mu;
            for (Eigen::Index d = 0; d < mu.size(); ++d) {
                const double gen = mu[d] - s.mu_bar[d];
                const double syn = y.points(r, d) - s.mu_bar[d];
                const bool same_side = gen == 0.0 || (gen > 0) == (syn >= 0);
                if (!same_side || std::abs(syn) < std::abs(gen)) ++violations;
            }
            if (noise == Noise::deterministic_one) {
                auto [it, fresh] = first.emplace(y.generator[static_cast<std::size_t>(r)], y.points.row(r));
                if (!fresh) CHECK(it->second == y.points.row(r));
            }
        }
        CHECK(violations == 0);
        for (auto g : y.generator) CHECK(is_member(Selector::ellipsoid, q.entries[g].mu, s, 1.5));
    }
}

TEST_CASE("synthesize: generators are drawn uniformly") {
    OutskirtSet o;
    o.stats = unit_stats(1);
    for (std::size_t i = 0; i < 4; ++i) o.selected.push_back({i, {Eigen::VectorXd::Constant(1, 2.0 + static_cast<double>(i)), Eigen::VectorXd::Ones(1)}});
    SynthesisConfig cfg;
    cfg.count = 40000;
    const auto y = synthesize(o, cfg);
    std::map<std::size_t, int> counts;
    for (auto g : y.generator) ++counts[g];
    REQUIRE(counts.size() == 4);
    // binomial std is about 87 around 10000
    for (auto [g, c] : counts) CHECK(std::abs(c - 10000) < 450);
}

TEST_CASE("synthesize: seeds and validation") {
    const auto q = random_catalog(100, 2, 8);
    const auto o = select_l2(q, meta_stats(q), 1.0);
    SynthesisConfig cfg;
    cfg.count = 50;
    cfg.seed = 4;
    CHECK(synthesize(o, cfg).points == synthesize(o, cfg).points);
    cfg.seed = 5;
    const auto other = synthesize(o, cfg).points;
    cfg.seed = 4;
    CHECK(synthesize(o, cfg).points != other);

    cfg.beta = 0.0;
    CHECK_THROWS_AS(synthesize(o, cfg), ConfigError);
    cfg.beta = 1.0;
    cfg.count = 0;
    CHECK_THROWS_AS(synthesize(o, cfg), ConfigError);
    cfg.count = 1;
    CHECK_THROWS_AS(synthesize(OutskirtSet{}, cfg), EmptyOutskirtError);
}

TEST_CASE("jitter_ae_space") {
    const Matrix codes = Matrix::Constant(1000, 100, 0.5);
    CHECK(jitter_ae_space(codes, 0.0, 1) == codes);
    const Matrix diff = jitter_ae_space(codes, 1.5, 2) - codes;
    const double n = static_cast<double>(diff.size());
    const double mean = diff.mean();
    const double sd = std::sqrt((diff.array() - mean).square().sum() / (n - 1));
    CHECK(std::abs(sd - 1.5) <= 0.02 * 1.5);
    CHECK(std::abs(mean) <= 3.0 * 1.5 / std::sqrt(n));
}

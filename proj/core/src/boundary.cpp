#include "outskirt/boundary.hpp"

#include <cmath>
#include <random>
#include <string>

#include "outskirt/error.hpp"
#include "outskirt/rng.hpp"

namespace outskirt::boundary {

MetaStats meta_stats(const LatentCatalog& q) {
    if (q.size() < 2) {
        throw DataError("meta statistics need at least 2 catalog entries, got " + std::to_string(q.size()));
    }
    const auto d = static_cast<Eigen::Index>(q.dim());
    const double n = static_cast<double>(q.size());

    MetaStats s;
    s.n = q.size();
    s.mu_bar = Eigen::VectorXd::Zero(d);
    for (const auto& e : q.entries) {
        if (e.mu.size() != d) throw DataError("catalog entries have inconsistent dimensions");
        s.mu_bar += e.mu;
    }
    s.mu_bar /= n;

    s.sigma_bar_sq = Eigen::VectorXd::Zero(d);
    for (const auto& e : q.entries) s.sigma_bar_sq += (e.mu - s.mu_bar).cwiseAbs2();
    s.sigma_bar_sq /= (n - 1.0);

    for (Eigen::Index i = 0; i < d; ++i) {
        if (!(s.sigma_bar_sq[i] > 0.0)) {
            throw DataError("meta-distribution axis " + std::to_string(i) +
                            " has zero variance; the catalog is degenerate along it");
        }
    }

    double norm_sum = 0.0;
    for (const auto& e : q.entries) norm_sum += e.mu.norm();
    s.mu_bar_l2 = norm_sum / n;
    double var = 0.0;
    for (const auto& e : q.entries) {
        const double dev = e.mu.norm() - s.mu_bar_l2;
        var += dev * dev;
    }
    s.sigma_bar_l2 = std::sqrt(var / (n - 1.0));
    return s;
}

Selector parse_selector(std::string_view s) {
    if (s == "ellipsoid") return Selector::ellipsoid;
    if (s == "l2") return Selector::l2;
    throw ConfigError("unknown selector '" + std::string(s) + "' (expected ellipsoid or l2)");
}

std::string_view to_string(Selector s) { return s == Selector::ellipsoid ? "ellipsoid" : "l2"; }

bool ellipsoid_member(const Eigen::VectorXd& mu, const MetaStats& stats, double alpha) {
    double acc = 0.0;
    for (Eigen::Index d = 0; d < mu.size(); ++d) {
        const double dev = mu[d] - stats.mu_bar[d];
        acc += dev * dev / (alpha * stats.sigma_bar_sq[d]);
    }
    return acc >= 1.0;
}

bool l2_member(const Eigen::VectorXd& mu, const MetaStats& stats, double alpha) {
    return std::abs(mu.norm() - stats.mu_bar_l2) >= alpha * stats.sigma_bar_l2;
}

bool is_member(Selector rule, const Eigen::VectorXd& mu, const MetaStats& stats, double alpha) {
    return rule == Selector::ellipsoid ? ellipsoid_member(mu, stats, alpha) : l2_member(mu, stats, alpha);
}

std::vector<std::size_t> member_indices(Selector rule, const LatentCatalog& q, const MetaStats& stats,
                                        double alpha) {
    if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (is_member(rule, q.entries[i].mu, stats, alpha)) idx.push_back(i);
    }
    return idx;
}

OutskirtSet select(Selector rule, const LatentCatalog& q, const MetaStats& stats, double alpha) {
    OutskirtSet out;
    out.rule = rule;
    out.alpha = alpha;
    out.stats = stats;
    for (auto i : member_indices(rule, q, stats, alpha)) out.selected.push_back({i, q.entries[i]});
    if (out.selected.empty()) {
        throw EmptyOutskirtError("no catalog entry lies on the outskirts under the " +
                                 std::string(to_string(rule)) + " rule at alpha=" + std::to_string(alpha) +
                                 "; lower alpha");
    }
    return out;
}

OutskirtSet select_ellipsoid(const LatentCatalog& q, const MetaStats& stats, double alpha) {
    return select(Selector::ellipsoid, q, stats, alpha);
}

OutskirtSet select_l2(const LatentCatalog& q, const MetaStats& stats, double alpha) {
    return select(Selector::l2, q, stats, alpha);
}

Eigen::VectorXd direction_signs(const GaussianParams& p, const MetaStats& stats) {
    Eigen::VectorXd s(p.mu.size());
    for (Eigen::Index d = 0; d < s.size(); ++d) s[d] = p.mu[d] >= stats.mu_bar[d] ? 1.0 : -1.0;
    return s;
}

void SynthesisConfig::validate() const {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be positive");
    if (count < 1) throw ConfigError("synthesis count must be >= 1");
}

SyntheticOutliers synthesize(const OutskirtSet& outskirts, const SynthesisConfig& cfg) {
    cfg.validate();
    if (outskirts.empty()) throw EmptyOutskirtError("cannot synthesize from an empty outskirt set");
    const auto d = static_cast<Eigen::Index>(outskirts.selected.front().params.dim());

    SyntheticOutliers out;
    out.points.resize(static_cast<Eigen::Index>(cfg.count), d);
    out.generator.reserve(cfg.count);
    for (std::size_t j = 0; j < cfg.count; ++j) {
        Engine engine(derive_seed(cfg.seed, j));
        std::uniform_int_distribution<std::size_t> pick(0, outskirts.size() - 1);
        const auto& member = outskirts.selected[pick(engine)];
        const auto& p = member.params;
        const Eigen::VectorXd s = direction_signs(p, outskirts.stats);
        Eigen::VectorXd eps(d);
        if (cfg.noise == Noise::deterministic_one) {
            eps.setOnes();
        } else {
            std::normal_distribution<double> normal;
            for (Eigen::Index k = 0; k < d; ++k) eps[k] = std::abs(normal(engine));
        }
        out.points.row(static_cast<Eigen::Index>(j)) =
            (p.mu + cfg.beta * s.cwiseProduct(p.sigma).cwiseProduct(eps)).transpose();
        out.generator.push_back(member.index);
    }
    return out;
}

Matrix jitter_ae_space(const Matrix& codes, double noise_sigma, std::uint64_t seed) {
    if (noise_sigma < 0.0) throw ConfigError("jitter sigma must be non-negative");
    Matrix out = codes;
    if (noise_sigma == 0.0) return out;
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        Engine engine(derive_seed(seed, static_cast<std::uint64_t>(r)));
        std::normal_distribution<double> normal(0.0, noise_sigma);
        for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) += normal(engine);
    }
    return out;
}

}  // namespace outskirt::boundary

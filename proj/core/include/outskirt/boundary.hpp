#pragma once

// Outskirt selection over the latent catalog and zero-shot outlier synthesis.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "outskirt/error.hpp"
#include "outskirt/hierarchy.hpp"

namespace outskirt::boundary {

using hierarchy::GaussianParams;
using hierarchy::LatentCatalog;
using nnet::Matrix;

/// Statistics of the catalog means (the meta-distribution). Variances use
/// the n-1 denominator.
struct MetaStats {
    Eigen::VectorXd mu_bar;
    Eigen::VectorXd sigma_bar_sq;
    double mu_bar_l2 = 0.0;
    double sigma_bar_l2 = 0.0;  // standard deviation of the mean norms
    std::size_t n = 0;

    bool operator==(const MetaStats&) const = default;
};

/// Throws DataError for fewer than two entries or a zero-variance axis.
MetaStats meta_stats(const LatentCatalog& q);

enum class Selector { ellipsoid, l2 };

Selector parse_selector(std::string_view s);
std::string_view to_string(Selector s);

struct OutskirtMember {
    std::size_t index = 0;  // into the catalog
    GaussianParams params;
};

struct OutskirtSet {
    std::vector<OutskirtMember> selected;
    Selector rule = Selector::l2;
    double alpha = 1.0;
    MetaStats stats;

    std::size_t size() const { return selected.size(); }
    bool empty() const { return selected.empty(); }
};

/// Thrown when no catalog entry passes the rule at the requested alpha.
struct EmptyOutskirtError : DataError {
    explicit EmptyOutskirtError(const std::string& what) : DataError(what) {}
};

/// sum_d (mu_d - mu_bar_d)^2 / (alpha * sigma_bar_sq_d) >= 1
bool ellipsoid_member(const Eigen::VectorXd& mu, const MetaStats& stats, double alpha);

/// | |mu|_2 - mu_bar_l2 | >= alpha * sigma_bar_l2
bool l2_member(const Eigen::VectorXd& mu, const MetaStats& stats, double alpha);

bool is_member(Selector rule, const Eigen::VectorXd& mu, const MetaStats& stats, double alpha);

OutskirtSet select_ellipsoid(const LatentCatalog& q, const MetaStats& stats, double alpha);
OutskirtSet select_l2(const LatentCatalog& q, const MetaStats& stats, double alpha);
OutskirtSet select(Selector rule, const LatentCatalog& q, const MetaStats& stats, double alpha);

/// Same rules without the empty-set error; used for diagnostics.
std::vector<std::size_t> member_indices(Selector rule, const LatentCatalog& q, const MetaStats& stats,
                                        double alpha);

/// +1 where mu_d >= mu_bar_d, -1 elsewhere.
Eigen::VectorXd direction_signs(const GaussianParams& p, const MetaStats& stats);

enum class Noise { half_normal, deterministic_one };

struct SynthesisConfig {
    double beta = 5.0;
    Noise noise = Noise::half_normal;
    std::size_t count = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SyntheticOutliers {
    Matrix points;                        // [count x d]
    std::vector<std::size_t> generator;   // catalog index that produced each row
};

/// y = mu + beta * s * sigma * eps with s from direction_signs and eps from
/// the configured noise. Generators are drawn uniformly with replacement;
/// sample j uses its own seed derived from (cfg.seed, j).
SyntheticOutliers synthesize(const OutskirtSet& outskirts, const SynthesisConfig& cfg);

/// Adds zero-mean Gaussian noise with standard deviation `noise_sigma`.
Matrix jitter_ae_space(const Matrix& codes, double noise_sigma, std::uint64_t seed);

}  // namespace outskirt::boundary

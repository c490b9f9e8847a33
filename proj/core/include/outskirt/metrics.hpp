#pragma once

// Evaluation metrics and fold bookkeeping. Inliers are the positive class
// (label 1), outliers the negative class (label 0).

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace outskirt::metrics {

/// Mann-Whitney AUC: P(score+ > score-) + 0.5 P(tie). Throws DataError if
/// either class is absent.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct Confusion {
    std::size_t tp = 0, fn = 0, fp = 0, tn = 0;
};

Confusion confusion(std::span<const int> predicted, std::span<const int> labels);

/// Predicted label 1 where score > 0.
std::vector<int> predict_labels(std::span<const double> scores);

struct Rates {
    double tpr = 0.0;
    double fpr = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1_inlier = 0.0;    // binary F1 of the inlier class
    double f1_weighted = 0.0;  // support-weighted mean of per-class F1
    bool zero_division = false;
};

/// All rates derived from one confusion matrix. Zero denominators yield 0
/// and set `zero_division`.
Rates rates(const Confusion& c);

double f1_weighted(std::span<const int> predicted, std::span<const int> labels);

struct TprFpr {
    double tpr;
    double fpr;
};
TprFpr tpr_fpr(std::span<const int> predicted, std::span<const int> labels);

struct FoldMetrics {
    std::size_t fold = 0;
    double outlier_pct = 0.0;
    double auc = 0.0;
    Rates rates;
    Confusion confusion;
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
};

FoldMetrics evaluate(std::span<const double> scores, std::span<const int> labels);

struct EvalReport {
    std::vector<FoldMetrics> per_fold;
    FoldMetrics aggregate;  // arithmetic mean over folds
    std::string config_fingerprint;
    std::vector<std::string> warnings;
};

/// Means of every rate across `folds`; counts are summed.
FoldMetrics aggregate(std::span<const FoldMetrics> folds);

/// Shuffled partition of [0, n) into k folds whose sizes differ by at most 1.
std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed);

/// Outliers needed so they make up `pct` percent of the evaluation set:
/// round(pct / (100 - pct) * test_inliers).
std::size_t outlier_count(double pct, std::size_t test_inliers);

/// CSV with one row per fold and a final `mean` row.
void write_report_csv(std::ostream& os, const EvalReport& report, bool header = true);

/// Fixed-precision formatting used by all CSV writers.
std::string format_number(double v);

}  // namespace outskirt::metrics

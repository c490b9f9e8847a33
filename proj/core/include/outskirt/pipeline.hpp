#pragma once

// End-to-end orchestration: features -> hierarchy -> catalog -> outskirts
// -> synthetic outliers -> classifier -> metrics, plus cross-validation,
// the alpha/beta grid and ablation tables.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "outskirt/boundary.hpp"
#include "outskirt/classify.hpp"
#include "outskirt/data_io.hpp"
#include "outskirt/features.hpp"
#include "outskirt/hierarchy.hpp"
#include "outskirt/metrics.hpp"

namespace outskirt::pipeline {

using hierarchy::FeatureSet;
using nnet::Matrix;

enum class FeatureKind { hog, lbp, raw };
enum class SynthesisMode { stochastic, deterministic, jitter, none };

FeatureKind parse_feature(std::string_view s);
SynthesisMode parse_synthesis(std::string_view s);
std::string_view to_string(FeatureKind f);
std::string_view to_string(SynthesisMode m);

struct PipelineConfig {
    std::vector<FeatureKind> features{FeatureKind::hog, FeatureKind::lbp, FeatureKind::raw};
    features::HogConfig hog;
    features::LbpConfig lbp;
    std::size_t vector_groups = 1;  // feature blocks carved out of vector data
    bool standardize = true;        // z-score feature columns on the training fold
    double std_floor = 0.1;

    hierarchy::AeMode ae_mode = hierarchy::AeMode::individual;
    hierarchy::AeSpec ae;
    hierarchy::ReconLoss ae_loss = hierarchy::ReconLoss::sse;
    hierarchy::FusionMode fusion = hierarchy::FusionMode::vae;
    hierarchy::VaeSpec vae;
    hierarchy::Schedule schedule = hierarchy::Schedule::joint;
    nnet::TrainConfig train;

    std::optional<boundary::Selector> selector = boundary::Selector::l2;
    double alpha = 3.0;
    double beta = 5.0;
    SynthesisMode synthesis = SynthesisMode::stochastic;
    std::size_t synthesis_count = 0;  // 0: one per training inlier
    double jitter_sigma = 1.5;

    classify::ClassifierKind classifier = classify::ClassifierKind::svm;
    classify::KernelSpec kernel{classify::KernelType::rbf, 1.0, 0.0, 3};
    double svm_c = 0.1;
    double ocsvm_nu = 0.1;
    classify::SolverOptions solver;
    classify::MlpSpec mlp;

    std::size_t folds = 5;
    std::vector<double> outlier_pcts{50.0};
    int inlier_class = 0;
    std::uint64_t seed = 0;

    /// Throws ConfigError on any invariant violation.
    void validate() const;

    hierarchy::HierarchyConfig hierarchy_config(std::uint64_t seed) const;
};

/// Applies one dotted `key=value` setting. Unknown keys are ConfigErrors.
void apply_setting(PipelineConfig& cfg, std::string_view key, std::string_view value);

/// Flat config text: one `key = value` per line, `#` comments.
PipelineConfig parse_config(std::string_view text, PipelineConfig base = {});
PipelineConfig load_config(const std::string& path, PipelineConfig base = {});

/// Canonical (sorted) key/value listing of every setting.
std::vector<std::pair<std::string, std::string>> config_entries(const PipelineConfig& cfg);
std::string config_text(const PipelineConfig& cfg);
std::string config_fingerprint(const PipelineConfig& cfg);

/// Every known config key, sorted.
std::vector<std::string> config_keys();

/// Inputs for one run: either images or plain vectors, each row tagged with
/// a stable id (its index in the source dataset).
struct SampleSet {
    std::vector<features::GrayImage> images;
    Matrix vectors;
    std::vector<std::size_t> ids;

    bool is_images() const { return !images.empty(); }
    std::size_t size() const { return ids.size(); }
    SampleSet subset(const std::vector<std::size_t>& rows) const;

    static SampleSet from_images(std::vector<features::GrayImage> images, std::vector<std::size_t> ids);
    static SampleSet from_vectors(Matrix vectors, std::vector<std::size_t> ids);
};

/// Inliers and the true-outlier pool of one experiment.
struct ExperimentData {
    SampleSet inliers;
    SampleSet outliers;
    std::string description;
    std::string fingerprint;
};

/// Splits a labelled dataset into `inlier_class` and everything else.
ExperimentData split_by_class(const data_io::Dataset& d, int inlier_class);
ExperimentData from_blobs(const data_io::Blobs& b, std::string description);
ExperimentData from_matrices(Matrix inliers, Matrix outliers, std::string description);

/// Feature blocks, one matrix per block, rows aligned with `samples`.
FeatureSet extract_features(const PipelineConfig& cfg, const SampleSet& samples, std::size_t workers = 1);

/// Rows of every block.
FeatureSet take_rows(const FeatureSet& f, const std::vector<std::size_t>& rows);

/// Trained representation: hierarchy, catalog and the embedded training
/// inliers. Independent of alpha, beta and the classifier.
struct Representation {
    hierarchy::Hierarchy hierarchy;
    hierarchy::LatentCatalog catalog;  // empty when fusion is none
    Matrix positives;                  // classifier positives (catalog means or codes)
    std::vector<double> loss_history;
};

Representation fit_representation(const PipelineConfig& cfg, const FeatureSet& train, std::uint64_t seed);

struct Negatives {
    Matrix points;
    std::vector<std::size_t> generator;
    std::size_t outskirt_size = 0;
};

/// Synthetic outliers for the configured mode (empty for synthesis=none).
Negatives make_negatives(const PipelineConfig& cfg, const Representation& rep, std::uint64_t seed);

classify::Classifier fit_classifier(const PipelineConfig& cfg, const Matrix& positives,
                                    const Matrix& negatives, std::uint64_t seed);

struct PipelineModel {
    PipelineConfig config;
    std::size_t fold = 0;
    hierarchy::Hierarchy hierarchy;
    std::optional<hierarchy::LatentCatalog> catalog;
    classify::Classifier classifier;

    Eigen::VectorXd score(const FeatureSet& features) const;
    bool operator==(const PipelineModel& other) const;
};

struct FitOutput {
    PipelineModel model;
    Representation representation;
    Negatives negatives;
    std::vector<std::string> warnings;
};

/// Seed of fold `fold`'s model; all of the fold's randomness derives from it.
std::uint64_t fold_seed(const PipelineConfig& cfg, std::size_t fold);

FitOutput fit_model(const PipelineConfig& cfg, const FeatureSet& train, std::size_t fold);

/// Fold layout over the inliers plus each fold's outlier draw order.
struct FoldPlan {
    std::vector<std::vector<std::size_t>> test;   // inlier rows per fold
    std::vector<std::vector<std::size_t>> train;  // complement of test
    std::vector<std::vector<std::size_t>> outlier_order;  // shuffled pool rows per fold
};

FoldPlan plan_folds(const PipelineConfig& cfg, std::size_t n_inliers, std::size_t n_outliers);

/// Outlier rows used at `pct` for `fold`: a prefix of the fold's shuffled
/// pool, so smaller percentages use subsets of larger ones. Throws DataError
/// when the pool is too small.
std::vector<std::size_t> outlier_rows(const FoldPlan& plan, std::size_t fold, double pct,
                                      std::size_t test_inliers);

/// Throws StateError if any training id is also a true-outlier id.
void audit_zero_shot(const ExperimentData& data, const std::vector<std::size_t>& train_rows);

/// Features extracted once for the whole experiment.
struct PreparedData {
    FeatureSet inliers;
    FeatureSet outliers;
};

PreparedData prepare(const PipelineConfig& cfg, const ExperimentData& data, std::size_t workers = 1);

/// Metrics of one model on its fold's test inliers, at every configured
/// percentage.
std::vector<metrics::FoldMetrics> evaluate_model(const PipelineModel& model, const PreparedData& prep,
                                                 const FoldPlan& plan);

struct ExperimentResult {
    std::vector<metrics::EvalReport> reports;  // one per outlier percentage
    std::vector<std::string> warnings;
};

ExperimentResult run_experiment(const PipelineConfig& cfg, const ExperimentData& data,
                                std::size_t workers = 1);

struct GridSpec {
    std::vector<double> alphas{1.0, 1.25, 1.5, 1.75, 2.0};
    std::vector<double> betas{1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0};
};

struct GridCell {
    double alpha = 0.0;
    double beta = 0.0;
    double auc = 0.0;  // NaN when any fold failed
    double f1 = 0.0;
    double outskirt_size = 0.0;  // mean over folds
    std::string status;          // "ok" or "invalid"
    std::string reason;
};

/// One row per (alpha, beta), alpha-major. Metrics use the first outlier
/// percentage of the config.
std::vector<GridCell> grid_search_alpha_beta(const PipelineConfig& cfg, const ExperimentData& data,
                                             const GridSpec& grid = {}, std::size_t workers = 1);

void write_grid_csv(std::ostream& os, const std::vector<GridCell>& cells);

struct AblationVariant {
    std::string name;
    PipelineConfig config;
};

/// Standard ablation rows around `base`: the full pipeline, both selectors
/// with stochastic and deterministic noise, alternative AE modes, no fusion
/// with a one-class classifier and AE fusion with jitter. Feature subsets are
/// added for image data.
std::vector<AblationVariant> ablation_variants(const PipelineConfig& base, bool image_data);

struct AblationRow {
    std::string name;
    PipelineConfig config;
    metrics::FoldMetrics metrics;  // mean over folds at the first percentage
    bool vector_data = false;      // features column shows the column groups instead
    std::string status;
    std::string reason;
};

std::vector<AblationRow> ablate(const std::vector<AblationVariant>& variants, const ExperimentData& data,
                                std::size_t workers = 1);

void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows);

/// Runs `count` independent tasks on up to `workers` threads. Each result
/// lands at its task index, so output never depends on the worker count.
template <class Result, class Fn>
std::vector<Result> parallel_map(std::size_t count, std::size_t workers, Fn&& fn);

struct RunManifest {
    std::string command;
    PipelineConfig config;
    std::map<std::string, std::uint64_t> seeds;
    std::map<std::string, std::string> datasets;  // name -> fingerprint
    std::string version;
    double wall_seconds = 0.0;
    std::string started_utc;
    std::map<std::string, std::string> outputs;  // artifact -> file name
    std::vector<std::string> warnings;
    std::vector<std::pair<std::string, double>> metrics;
};

std::string manifest_json(const RunManifest& m);

/// Seeds of every named substream, for manifests.
std::map<std::string, std::uint64_t> seed_table(const PipelineConfig& cfg);

std::string_view version();

}  // namespace outskirt::pipeline

#include "outskirt/detail/parallel.hpp"

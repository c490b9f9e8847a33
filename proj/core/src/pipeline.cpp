#include "outskirt/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <limits>
#include <numeric>
#include <set>

#include <json.hpp>

#include "outskirt/error.hpp"
#include "outskirt/model_file.hpp"
#include "outskirt/rng.hpp"

#ifndef OUTSKIRT_VERSION
#define OUTSKIRT_VERSION "0.0.0"
#endif

namespace outskirt::pipeline {

using boundary::Selector;
using classify::ClassifierKind;
using hierarchy::AeMode;
using hierarchy::FusionMode;

std::string_view version() { return OUTSKIRT_VERSION; }

FeatureKind parse_feature(std::string_view s) {
    if (s == "hog") return FeatureKind::hog;
    if (s == "lbp") return FeatureKind::lbp;
    if (s == "raw") return FeatureKind::raw;
    throw ConfigError("unknown feature '" + std::string(s) + "' (expected hog, lbp or raw)");
}

SynthesisMode parse_synthesis(std::string_view s) {
    if (s == "stochastic") return SynthesisMode::stochastic;
    if (s == "deterministic") return SynthesisMode::deterministic;
    if (s == "jitter") return SynthesisMode::jitter;
    if (s == "none") return SynthesisMode::none;
    throw ConfigError("unknown synthesis mode '" + std::string(s) +
                      "' (expected stochastic, deterministic, jitter or none)");
}

std::string_view to_string(FeatureKind f) {
    switch (f) {
        case FeatureKind::hog: return "hog";
        case FeatureKind::lbp: return "lbp";
        case FeatureKind::raw: return "raw";
    }
    return "?";
}

std::string_view to_string(SynthesisMode m) {
    switch (m) {
        case SynthesisMode::stochastic: return "stochastic";
        case SynthesisMode::deterministic: return "deterministic";
        case SynthesisMode::jitter: return "jitter";
        case SynthesisMode::none: return "none";
    }
    return "?";
}

void PipelineConfig::validate() const {
    if (features.empty()) throw ConfigError("features: at least one descriptor is required");
    if (std::set<FeatureKind>(features.begin(), features.end()).size() != features.size()) {
        throw ConfigError("features: duplicate descriptor");
    }
    hog.validate();
    lbp.validate();
    if (vector_groups < 1) throw ConfigError("vector.groups must be >= 1");
    if (!(std_floor > 0.0)) throw ConfigError("features.std_floor must be > 0");
    if (ae.layers < 1) throw ConfigError("ae.layers must be >= 1");
    if (!(ae.noise_sigma >= 0.0)) throw ConfigError("ae.noise must be >= 0");
    if (vae.layers < 1) throw ConfigError("vae.layers must be >= 1");
    if (vae.latent_dim < 1) throw ConfigError("vae.latent_dim must be >= 1");
    train.validate();

    if (fusion == FusionMode::none && (selector || synthesis != SynthesisMode::none)) {
        throw ConfigError("fusion=none leaves no distribution space: set selector=none and synthesis=none");
    }
    if (synthesis == SynthesisMode::none && classifier != ClassifierKind::ocsvm) {
        throw ConfigError("synthesis=none provides no negatives: classifier must be ocsvm");
    }
    if (synthesis != SynthesisMode::none && classifier == ClassifierKind::ocsvm) {
        throw ConfigError("classifier=ocsvm trains on inliers only: set synthesis=none");
    }
    if (synthesis == SynthesisMode::jitter && fusion != FusionMode::ae) {
        throw ConfigError("synthesis=jitter requires fusion=ae");
    }
    if (synthesis != SynthesisMode::none && !selector) {
        throw ConfigError("synthesis=" + std::string(to_string(synthesis)) + " needs a selector");
    }
    if (!(alpha > 0.0)) throw ConfigError("alpha must be > 0");
    if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
    if (!(jitter_sigma > 0.0)) throw ConfigError("jitter.sigma must be > 0");

    if (!(svm_c > 0.0)) throw ConfigError("svm.C must be > 0");
    if (!(kernel.gamma > 0.0)) throw ConfigError("svm.gamma must be > 0");
    if (kernel.degree < 1) throw ConfigError("svm.degree must be >= 1");
    if (!(solver.tolerance > 0.0)) throw ConfigError("svm.tol must be > 0");
    if (solver.max_passes < 1) throw ConfigError("svm.max_passes must be >= 1");
    if (!(ocsvm_nu > 0.0 && ocsvm_nu <= 1.0)) throw ConfigError("ocsvm.nu must be in (0, 1]");
    if (mlp.hidden < 1) throw ConfigError("mlp.hidden must be >= 1");
    mlp.train.validate();

    if (folds < 2) throw ConfigError("cv.folds must be >= 2");
    if (outlier_pcts.empty()) throw ConfigError("cv.outlier_pct needs at least one percentage");
    for (double p : outlier_pcts) {
        if (!(p > 0.0 && p < 100.0)) throw ConfigError("cv.outlier_pct values must be in (0, 100)");
    }
}

hierarchy::HierarchyConfig PipelineConfig::hierarchy_config(std::uint64_t s) const {
    hierarchy::HierarchyConfig h;
    h.ae_mode = ae_mode;
    h.ae = ae;
    h.ae_loss = ae_loss;
    h.fusion = fusion;
    h.vae = vae;
    h.schedule = schedule;
    h.train = train;
    h.train.seed = s;
    h.standardize = standardize;
    h.std_floor = std_floor;
    h.seed = s;
    return h;
}

// ---------------------------------------------------------------------------

SampleSet SampleSet::subset(const std::vector<std::size_t>& rows) const {
    SampleSet out;
    out.ids.reserve(rows.size());
    if (is_images()) {
        out.images.reserve(rows.size());
        for (auto r : rows) out.images.push_back(images.at(r));
    } else {
        out.vectors.resize(static_cast<Eigen::Index>(rows.size()), vectors.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            out.vectors.row(static_cast<Eigen::Index>(i)) = vectors.row(static_cast<Eigen::Index>(rows[i]));
        }
    }
    for (auto r : rows) out.ids.push_back(ids.at(r));
    return out;
}

SampleSet SampleSet::from_images(std::vector<features::GrayImage> images, std::vector<std::size_t> ids) {
    if (images.size() != ids.size()) throw DataError("sample set: images and ids differ in length");
    SampleSet s;
    s.images = std::move(images);
    s.ids = std::move(ids);
    return s;
}

SampleSet SampleSet::from_vectors(Matrix vectors, std::vector<std::size_t> ids) {
    if (static_cast<std::size_t>(vectors.rows()) != ids.size()) {
        throw DataError("sample set: vectors and ids differ in length");
    }
    SampleSet s;
    s.vectors = std::move(vectors);
    s.ids = std::move(ids);
    return s;
}

ExperimentData split_by_class(const data_io::Dataset& d, int inlier_class) {
    const auto in = d.indices_of(inlier_class);
    const auto out = d.indices_except(inlier_class);
    if (in.empty()) {
        throw DataError("no samples of inlier class " + std::to_string(inlier_class) + " in " + d.source);
    }
    ExperimentData e;
    const auto sub_in = d.subset(in);
    const auto sub_out = d.subset(out);
    e.inliers = SampleSet::from_images(sub_in.images, in);
    e.outliers = SampleSet::from_images(sub_out.images, out);
    e.description = d.source + " class " + std::to_string(inlier_class);
    e.fingerprint = data_io::fingerprint(d);
    return e;
}

ExperimentData from_matrices(Matrix inliers, Matrix outliers, std::string description) {
    if (inliers.cols() != outliers.cols() && outliers.rows() > 0) {
        throw DataError("inlier and outlier matrices have different column counts");
    }
    ExperimentData e;
    const auto n_in = static_cast<std::size_t>(inliers.rows());
    const auto n_out = static_cast<std::size_t>(outliers.rows());
    std::vector<std::size_t> in_ids(n_in), out_ids(n_out);
    std::iota(in_ids.begin(), in_ids.end(), std::size_t{0});
    std::iota(out_ids.begin(), out_ids.end(), n_in);
    e.fingerprint = data_io::fingerprint(inliers) + "-" + data_io::fingerprint(outliers);
    e.inliers = SampleSet::from_vectors(std::move(inliers), std::move(in_ids));
    e.outliers = SampleSet::from_vectors(std::move(outliers), std::move(out_ids));
    e.description = std::move(description);
    return e;
}

ExperimentData from_blobs(const data_io::Blobs& b, std::string description) {
    return from_matrices(b.inliers, b.outliers, std::move(description));
}

// ---------------------------------------------------------------------------

namespace {

std::size_t feature_width(const PipelineConfig& cfg, FeatureKind k, const features::GrayImage& img) {
    switch (k) {
        case FeatureKind::hog: return features::hog_length(cfg.hog, img.width, img.height);
        case FeatureKind::lbp: return features::lbp_bins(cfg.lbp);
        case FeatureKind::raw: return img.width * img.height;
    }
    return 0;
}

features::FeatureVector compute_feature(const PipelineConfig& cfg, FeatureKind k, const features::GrayImage& img) {
    switch (k) {
        case FeatureKind::hog: return features::hog(img, cfg.hog);
        case FeatureKind::lbp: return features::lbp_histogram(img, cfg.lbp);
        case FeatureKind::raw: return features::raw(img);
    }
    return {};
}

constexpr std::size_t kFeatureChunk = 256;

}  // namespace

FeatureSet extract_features(const PipelineConfig& cfg, const SampleSet& samples, std::size_t workers) {
    FeatureSet out;
    const auto n = static_cast<Eigen::Index>(samples.size());
    if (!samples.is_images()) {
        const auto d = static_cast<std::size_t>(samples.vectors.cols());
        const std::size_t g = cfg.vector_groups;
        if (g > d) {
            throw ConfigError("vector.groups=" + std::to_string(g) + " exceeds the " + std::to_string(d) +
                              " data columns");
        }
        std::size_t at = 0;
        for (std::size_t i = 0; i < g; ++i) {
            const std::size_t w = d / g + (i < d % g ? 1 : 0);
            out.push_back(samples.vectors.middleCols(static_cast<Eigen::Index>(at), static_cast<Eigen::Index>(w)));
            at += w;
        }
        return out;
    }

    const auto& first = samples.images.front();
    for (const auto& img : samples.images) {
        if (img.width != first.width || img.height != first.height) {
            throw DataError("all images must share one size for feature extraction (" +
                            std::to_string(first.width) + "x" + std::to_string(first.height) + " vs " +
                            std::to_string(img.width) + "x" + std::to_string(img.height) + ")");
        }
    }
    for (auto k : cfg.features) {
        out.emplace_back(n, static_cast<Eigen::Index>(feature_width(cfg, k, first)));
    }
    const std::size_t chunks = (samples.size() + kFeatureChunk - 1) / kFeatureChunk;
    parallel_map<int>(chunks, workers, [&](std::size_t c) {
        const std::size_t end = std::min(samples.size(), (c + 1) * kFeatureChunk);
        for (std::size_t r = c * kFeatureChunk; r < end; ++r) {
            for (std::size_t b = 0; b < cfg.features.size(); ++b) {
                const auto v = compute_feature(cfg, cfg.features[b], samples.images[r]);
                out[b].row(static_cast<Eigen::Index>(r)) =
                    Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
            }
        }
        return 0;
    });
    return out;
}

FeatureSet take_rows(const FeatureSet& f, const std::vector<std::size_t>& rows) {
    FeatureSet out;
    out.reserve(f.size());
    for (const auto& block : f) {
        Matrix m(static_cast<Eigen::Index>(rows.size()), block.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            m.row(static_cast<Eigen::Index>(i)) = block.row(static_cast<Eigen::Index>(rows[i]));
        }
        out.push_back(std::move(m));
    }
    return out;
}

// ---------------------------------------------------------------------------

Representation fit_representation(const PipelineConfig& cfg, const FeatureSet& train, std::uint64_t seed) {
    auto fit = hierarchy::fit_hierarchy(train, cfg.hierarchy_config(seed));
    Representation rep;
    rep.hierarchy = std::move(fit.model);
    rep.catalog = std::move(fit.catalog);
    rep.loss_history = std::move(fit.loss_history);
    rep.positives = rep.catalog.size() > 0 ? rep.catalog.means() : rep.hierarchy.embed(train);
    return rep;
}

Negatives make_negatives(const PipelineConfig& cfg, const Representation& rep, std::uint64_t seed) {
    Negatives neg;
    if (cfg.synthesis == SynthesisMode::none) return neg;
    if (rep.catalog.size() == 0) throw ConfigError("synthesis needs a fusion stage");

    const auto stats = boundary::meta_stats(rep.catalog);
    const auto outskirts = boundary::select(*cfg.selector, rep.catalog, stats, cfg.alpha);
    neg.outskirt_size = outskirts.size();
    const std::size_t count = cfg.synthesis_count ? cfg.synthesis_count : rep.catalog.size();
    const auto synth_seed = derive_seed(seed, "synthesis");

    if (cfg.synthesis == SynthesisMode::jitter) {
        // outskirt codes picked uniformly with replacement, then jittered
        neg.points.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(rep.catalog.dim()));
        neg.generator.resize(count);
        std::uniform_int_distribution<std::size_t> pick(0, outskirts.size() - 1);
        for (std::size_t j = 0; j < count; ++j) {
            Engine e(derive_seed(synth_seed, j));
            const auto& m = outskirts.selected[pick(e)];
            neg.generator[j] = m.index;
            neg.points.row(static_cast<Eigen::Index>(j)) = m.params.mu.transpose();
        }
        neg.points = boundary::jitter_ae_space(neg.points, cfg.jitter_sigma, derive_seed(seed, "jitter"));
        return neg;
    }

    boundary::SynthesisConfig sc;
    sc.beta = cfg.beta;
    sc.noise = cfg.synthesis == SynthesisMode::deterministic ? boundary::Noise::deterministic_one
                                                               : boundary::Noise::half_normal;
    sc.count = count;
    sc.seed = synth_seed;
    auto y = boundary::synthesize(outskirts, sc);
    neg.points = std::move(y.points);
    neg.generator = std::move(y.generator);
    return neg;
}

classify::Classifier fit_classifier(const PipelineConfig& cfg, const Matrix& positives, const Matrix& negatives,
                                    std::uint64_t seed) {
    switch (cfg.classifier) {
        case ClassifierKind::svm: return classify::svm_fit(positives, negatives, cfg.kernel, cfg.svm_c, cfg.solver);
        case ClassifierKind::ocsvm: return classify::one_class_fit(positives, cfg.kernel, cfg.ocsvm_nu, cfg.solver);
        case ClassifierKind::nb: return classify::nb_fit(positives, negatives);
        case ClassifierKind::mlp: {
            auto spec = cfg.mlp;
            spec.train.seed = derive_seed(seed, "mlp-init");
            return classify::mlp_fit(positives, negatives, spec);
        }
    }
    throw ConfigError("unknown classifier");
}

Eigen::VectorXd PipelineModel::score(const FeatureSet& features) const {
    return classify::decision_scores(classifier, hierarchy.embed(features));
}

bool PipelineModel::operator==(const PipelineModel& other) const {
    return serialize_model(*this) == serialize_model(other);
}

std::uint64_t fold_seed(const PipelineConfig& cfg, std::size_t fold) {
    return derive_seed(derive_seed(cfg.seed, "fold-model"), static_cast<std::uint64_t>(fold));
}

namespace {

std::string convergence_warning(const classify::Classifier& c, std::size_t fold) {
    if (classify::converged(c)) return {};
    return "fold " + std::to_string(fold) + ": SVM solver stopped at its iteration cap before converging";
}

}  // namespace

FitOutput fit_model(const PipelineConfig& cfg, const FeatureSet& train, std::size_t fold) {
    cfg.validate();
    const auto seed = fold_seed(cfg, fold);
    FitOutput out;
    out.representation = fit_representation(cfg, train, seed);
    out.negatives = make_negatives(cfg, out.representation, seed);
    out.model.config = cfg;
    out.model.fold = fold;
    out.model.hierarchy = out.representation.hierarchy;
    if (out.representation.catalog.size() > 0) out.model.catalog = out.representation.catalog;
    out.model.classifier =
        fit_classifier(cfg, out.representation.positives, out.negatives.points, derive_seed(seed, "classifier"));
    if (auto w = convergence_warning(out.model.classifier, fold); !w.empty()) out.warnings.push_back(w);
    return out;
}

// ---------------------------------------------------------------------------

FoldPlan plan_folds(const PipelineConfig& cfg, std::size_t n_inliers, std::size_t n_outliers) {
    FoldPlan plan;
    plan.test = metrics::kfold_split(n_inliers, cfg.folds, derive_seed(cfg.seed, "folds"));
    const auto draw_seed = derive_seed(cfg.seed, "outlier-draw");
    for (std::size_t f = 0; f < plan.test.size(); ++f) {
        std::vector<char> in_test(n_inliers, 0);
        for (auto i : plan.test[f]) in_test[i] = 1;
        std::vector<std::size_t> train;
        for (std::size_t i = 0; i < n_inliers; ++i)
            if (!in_test[i]) train.push_back(i);
        plan.train.push_back(std::move(train));

        std::vector<std::size_t> order(n_outliers);
        std::iota(order.begin(), order.end(), std::size_t{0});
        Engine e(derive_seed(draw_seed, static_cast<std::uint64_t>(f)));
        std::shuffle(order.begin(), order.end(), e);
        plan.outlier_order.push_back(std::move(order));
    }
    return plan;
}

std::vector<std::size_t> outlier_rows(const FoldPlan& plan, std::size_t fold, double pct, std::size_t test_inliers) {
    const auto need = metrics::outlier_count(pct, test_inliers);
    const auto& order = plan.outlier_order.at(fold);
    if (need == 0) {
        throw DataError("outlier percentage " + metrics::format_number(pct) + " of " +
                        std::to_string(test_inliers) + " test inliers rounds to zero outliers");
    }
    if (need > order.size()) {
        throw DataError("outlier pool too small: " + metrics::format_number(pct) + "% outliers with " +
                        std::to_string(test_inliers) + " test inliers needs " + std::to_string(need) +
                        " outliers, pool has " + std::to_string(order.size()));
    }
    return {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(need)};
}

void audit_zero_shot(const ExperimentData& data, const std::vector<std::size_t>& train_rows) {
    std::set<std::size_t> outlier_ids(data.outliers.ids.begin(), data.outliers.ids.end());
    for (auto r : train_rows) {
        if (outlier_ids.count(data.inliers.ids.at(r))) {
            throw StateError("zero-shot audit failed: training sample id " + std::to_string(data.inliers.ids[r]) +
                             " is in the true-outlier pool");
        }
    }
}

PreparedData prepare(const PipelineConfig& cfg, const ExperimentData& data, std::size_t workers) {
    if (data.inliers.size() == 0) throw DataError("experiment has no inliers");
    PreparedData p;
    p.inliers = extract_features(cfg, data.inliers, workers);
    if (data.outliers.size() > 0) p.outliers = extract_features(cfg, data.outliers, workers);
    return p;
}

namespace {

// Test-time embeddings of one fold. The outlier block holds the longest
// prefix any configured percentage needs.
struct FoldEmbedding {
    Matrix inliers;
    Matrix outliers;
};

std::size_t max_outliers(const PipelineConfig& cfg, const FoldPlan& plan, std::size_t fold) {
    std::size_t most = 0;
    for (double pct : cfg.outlier_pcts) {
        most = std::max(most, outlier_rows(plan, fold, pct, plan.test[fold].size()).size());
    }
    return most;
}

FoldEmbedding embed_fold(const hierarchy::Hierarchy& h, const PipelineConfig& cfg, const PreparedData& prep,
                         const FoldPlan& plan, std::size_t fold) {
    FoldEmbedding e;
    e.inliers = h.embed(take_rows(prep.inliers, plan.test[fold]));
    const auto& order = plan.outlier_order[fold];
    const auto n = max_outliers(cfg, plan, fold);
    e.outliers = h.embed(take_rows(prep.outliers, {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n)}));
    return e;
}

std::vector<metrics::FoldMetrics> score_fold(const classify::Classifier& clf, const PipelineConfig& cfg,
                                             const FoldEmbedding& emb, std::size_t fold) {
    const Eigen::VectorXd s_in = classify::decision_scores(clf, emb.inliers);
    const Eigen::VectorXd s_out = classify::decision_scores(clf, emb.outliers);
    std::vector<metrics::FoldMetrics> out;
    for (double pct : cfg.outlier_pcts) {
        const auto n_out = static_cast<Eigen::Index>(metrics::outlier_count(pct, static_cast<std::size_t>(s_in.size())));
        std::vector<double> scores(s_in.data(), s_in.data() + s_in.size());
        scores.insert(scores.end(), s_out.data(), s_out.data() + n_out);
        std::vector<int> labels(static_cast<std::size_t>(s_in.size()), 1);
        labels.resize(scores.size(), 0);
        auto m = metrics::evaluate(scores, labels);
        m.fold = fold;
        m.outlier_pct = pct;
        out.push_back(m);
    }
    return out;
}

struct FoldRun {
    std::vector<metrics::FoldMetrics> per_pct;
    std::vector<std::string> warnings;
};

}  // namespace

std::vector<metrics::FoldMetrics> evaluate_model(const PipelineModel& model, const PreparedData& prep,
                                                 const FoldPlan& plan) {
    if (model.fold >= plan.test.size()) throw ConfigError("model fold " + std::to_string(model.fold) + " out of range");
    const auto emb = embed_fold(model.hierarchy, model.config, prep, plan, model.fold);
    return score_fold(model.classifier, model.config, emb, model.fold);
}

ExperimentResult run_experiment(const PipelineConfig& cfg, const ExperimentData& data, std::size_t workers) {
    cfg.validate();
    const auto prep = prepare(cfg, data, workers);
    const auto plan = plan_folds(cfg, data.inliers.size(), data.outliers.size());
    for (std::size_t f = 0; f < cfg.folds; ++f) {
        audit_zero_shot(data, plan.train[f]);
        max_outliers(cfg, plan, f);  // fail early on a short pool
    }

    const auto runs = parallel_map<FoldRun>(cfg.folds, workers, [&](std::size_t f) {
        auto fit = fit_model(cfg, take_rows(prep.inliers, plan.train[f]), f);
        FoldRun r;
        r.per_pct = evaluate_model(fit.model, prep, plan);
        r.warnings = std::move(fit.warnings);
        return r;
    });

    ExperimentResult res;
    for (std::size_t p = 0; p < cfg.outlier_pcts.size(); ++p) {
        metrics::EvalReport rep;
        for (const auto& r : runs) rep.per_fold.push_back(r.per_pct[p]);
        rep.aggregate = metrics::aggregate(rep.per_fold);
        rep.config_fingerprint = config_fingerprint(cfg);
        res.reports.push_back(std::move(rep));
    }
    for (const auto& r : runs) res.warnings.insert(res.warnings.end(), r.warnings.begin(), r.warnings.end());
    for (auto& rep : res.reports) rep.warnings = res.warnings;
    return res;
}

// ---------------------------------------------------------------------------

namespace {

struct GridFold {
    Representation rep;
    FoldEmbedding emb;
    std::string error;
};

struct CellFold {
    metrics::FoldMetrics m;
    std::size_t outskirt = 0;
    std::string error;
};

std::string sanitize(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

}  // namespace

std::vector<GridCell> grid_search_alpha_beta(const PipelineConfig& cfg, const ExperimentData& data,
                                             const GridSpec& grid, std::size_t workers) {
    cfg.validate();
    if (cfg.fusion != FusionMode::vae) throw ConfigError("grid search requires fusion=vae");
    if (cfg.synthesis == SynthesisMode::none) throw ConfigError("grid search requires a synthesis mode");
    const auto prep = prepare(cfg, data, workers);
    const auto plan = plan_folds(cfg, data.inliers.size(), data.outliers.size());
    for (std::size_t f = 0; f < cfg.folds; ++f) {
        audit_zero_shot(data, plan.train[f]);
        max_outliers(cfg, plan, f);
    }

    const auto folds = parallel_map<GridFold>(cfg.folds, workers, [&](std::size_t f) {
        GridFold g;
        g.rep = fit_representation(cfg, take_rows(prep.inliers, plan.train[f]), fold_seed(cfg, f));
        g.emb = embed_fold(g.rep.hierarchy, cfg, prep, plan, f);
        return g;
    });

    const std::size_t n_cells = grid.alphas.size() * grid.betas.size();
    const auto cell_folds = parallel_map<CellFold>(n_cells * cfg.folds, workers, [&](std::size_t task) {
        const std::size_t cell = task / cfg.folds, f = task % cfg.folds;
        auto c = cfg;
        c.alpha = grid.alphas[cell / grid.betas.size()];
        c.beta = grid.betas[cell % grid.betas.size()];
        CellFold out;
        try {
            const auto seed = fold_seed(c, f);
            const auto neg = make_negatives(c, folds[f].rep, seed);
            out.outskirt = neg.outskirt_size;
            const auto clf = fit_classifier(c, folds[f].rep.positives, neg.points, derive_seed(seed, "classifier"));
            out.m = score_fold(clf, c, folds[f].emb, f).front();
        } catch (const boundary::EmptyOutskirtError& e) {
            out.error = "empty outskirt set";
        } catch (const Error& e) {
            out.error = e.what();
        }
        return out;
    });

    std::vector<GridCell> cells;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t cell = 0; cell < n_cells; ++cell) {
        GridCell g;
        g.alpha = grid.alphas[cell / grid.betas.size()];
        g.beta = grid.betas[cell % grid.betas.size()];
        std::vector<metrics::FoldMetrics> ok;
        std::size_t failed = 0;
        for (std::size_t f = 0; f < cfg.folds; ++f) {
            const auto& cf = cell_folds[cell * cfg.folds + f];
            g.outskirt_size += static_cast<double>(cf.outskirt) / static_cast<double>(cfg.folds);
            if (!cf.error.empty()) {
                ++failed;
                if (g.reason.empty()) g.reason = "fold " + std::to_string(f) + ": " + sanitize(cf.error);
            } else {
                ok.push_back(cf.m);
            }
        }
        if (failed) {
            g.status = "invalid";
            g.auc = g.f1 = nan;
            if (failed > 1) g.reason += " (" + std::to_string(failed) + " folds failed)";
        } else {
            const auto agg = metrics::aggregate(ok);
            g.status = "ok";
            g.auc = agg.auc;
            g.f1 = agg.rates.f1_weighted;
        }
        cells.push_back(std::move(g));
    }
    return cells;
}

void write_grid_csv(std::ostream& os, const std::vector<GridCell>& cells) {
    os << "alpha,beta,auc,f1,outskirt_size,status,reason\n";
    for (const auto& c : cells) {
        os << metrics::format_number(c.alpha) << ',' << metrics::format_number(c.beta) << ','
           << metrics::format_number(c.auc) << ',' << metrics::format_number(c.f1) << ','
           << metrics::format_number(c.outskirt_size) << ',' << c.status << ',' << c.reason << '\n';
    }
}

// ---------------------------------------------------------------------------

std::vector<AblationVariant> ablation_variants(const PipelineConfig& base, bool image_data) {
    std::vector<AblationVariant> v;
    PipelineConfig full = base;
    full.ae_mode = AeMode::individual;
    full.fusion = FusionMode::vae;
    if (!full.selector) full.selector = Selector::l2;
    full.synthesis = SynthesisMode::stochastic;
    if (full.classifier == ClassifierKind::ocsvm) full.classifier = ClassifierKind::svm;
    const auto sel = *full.selector;
    const auto other = sel == Selector::l2 ? Selector::ellipsoid : Selector::l2;
    const std::string sel_name(boundary::to_string(sel)), other_name(boundary::to_string(other));

    v.push_back({"full", full});
    auto det = full;
    det.synthesis = SynthesisMode::deterministic;
    v.push_back({"deterministic", det});
    auto alt = full;
    alt.selector = other;
    v.push_back({"full-" + other_name, alt});
    alt.synthesis = SynthesisMode::deterministic;
    v.push_back({"deterministic-" + other_name, alt});

    auto concat = full;
    concat.ae_mode = AeMode::concatenated;
    v.push_back({"concat-ae", concat});
    auto no_ae = full;
    no_ae.ae_mode = AeMode::none;
    v.push_back({"no-ae", no_ae});

    auto one_class = full;
    one_class.selector.reset();
    one_class.synthesis = SynthesisMode::none;
    one_class.classifier = ClassifierKind::ocsvm;
    v.push_back({"vae-ocsvm", one_class});
    auto no_vae = one_class;
    no_vae.fusion = FusionMode::none;
    no_vae.ae_mode = AeMode::concatenated;
    v.push_back({"no-vae-concat-ocsvm", no_vae});
    no_vae.ae_mode = AeMode::individual;
    v.push_back({"no-vae-individual-ocsvm", no_vae});

    auto jitter = full;
    jitter.fusion = FusionMode::ae;
    jitter.synthesis = SynthesisMode::jitter;
    v.push_back({"ae-fusion-jitter", jitter});

    if (image_data) {
        for (auto f : {FeatureKind::hog, FeatureKind::lbp, FeatureKind::raw}) {
            auto single = full;
            single.features = {f};
            v.push_back({std::string(to_string(f)) + "-only", single});
        }
    }
    (void)sel_name;
    return v;
}

std::vector<AblationRow> ablate(const std::vector<AblationVariant>& variants, const ExperimentData& data,
                                std::size_t workers) {
    std::vector<AblationRow> rows;
    for (const auto& var : variants) {
        AblationRow row;
        row.name = var.name;
        row.config = var.config;
        row.vector_data = !data.inliers.is_images();
        try {
            const auto res = run_experiment(var.config, data, workers);
            row.metrics = res.reports.front().aggregate;
            row.status = "ok";
            if (!res.warnings.empty()) row.reason = sanitize(res.warnings.front());
        } catch (const Error& e) {
            row.status = "failed";
            row.reason = sanitize(e.what());
            row.metrics.auc = std::numeric_limits<double>::quiet_NaN();
            row.metrics.rates.f1_weighted = std::numeric_limits<double>::quiet_NaN();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows) {
    os << "variant,features,ae_mode,fusion,selector,synthesis,classifier,auc,f1,f1_inlier,tpr,fpr,status,reason\n";
    for (const auto& r : rows) {
        std::string feats = r.vector_data ? "vector/" + std::to_string(r.config.vector_groups) : "";
        for (std::size_t i = 0; !r.vector_data && i < r.config.features.size(); ++i) {
            feats += (i ? "+" : "") + std::string(to_string(r.config.features[i]));
        }
        const auto& c = r.config;
        os << r.name << ',' << feats << ',' << hierarchy::to_string(c.ae_mode) << ','
           << hierarchy::to_string(c.fusion) << ',' << (c.selector ? boundary::to_string(*c.selector) : "none") << ','
           << to_string(c.synthesis) << ',' << classify::to_string(c.classifier) << ','
           << metrics::format_number(r.metrics.auc) << ',' << metrics::format_number(r.metrics.rates.f1_weighted)
           << ',' << metrics::format_number(r.metrics.rates.f1_inlier) << ','
           << metrics::format_number(r.metrics.rates.tpr) << ',' << metrics::format_number(r.metrics.rates.fpr)
           << ',' << r.status << ',' << r.reason << '\n';
    }
}

// ---------------------------------------------------------------------------

std::map<std::string, std::uint64_t> seed_table(const PipelineConfig& cfg) {
    std::map<std::string, std::uint64_t> s;
    s["master"] = cfg.seed;
    s["folds"] = derive_seed(cfg.seed, "folds");
    s["outlier-draw"] = derive_seed(cfg.seed, "outlier-draw");
    for (std::size_t f = 0; f < cfg.folds; ++f) {
        const auto fs = fold_seed(cfg, f);
        const auto p = "fold" + std::to_string(f) + ".";
        s[p + "model"] = fs;
        s[p + "ae-init"] = derive_seed(fs, "ae-init");
        s[p + "vae-init"] = derive_seed(fs, "vae-init");
        s[p + "vae-noise"] = derive_seed(fs, "vae-noise");
        s[p + "synthesis"] = derive_seed(fs, "synthesis");
        s[p + "classifier"] = derive_seed(fs, "classifier");
    }
    return s;
}

std::string manifest_json(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["command"] = m.command;
    j["version"] = m.version.empty() ? std::string(version()) : m.version;
    j["started_utc"] = m.started_utc;
    j["wall_seconds"] = m.wall_seconds;
    j["config_fingerprint"] = config_fingerprint(m.config);
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    for (const auto& [k, v] : config_entries(m.config)) cfg[k] = v;
    j["config"] = cfg;
    nlohmann::ordered_json seeds = nlohmann::ordered_json::object();
    for (const auto& [k, v] : m.seeds) seeds[k] = v;
    j["seeds"] = seeds;
    nlohmann::ordered_json ds = nlohmann::ordered_json::object();
    for (const auto& [k, v] : m.datasets) ds[k] = v;
    j["datasets"] = ds;
    nlohmann::ordered_json outs = nlohmann::ordered_json::object();
    for (const auto& [k, v] : m.outputs) outs[k] = v;
    j["outputs"] = outs;
    nlohmann::ordered_json met = nlohmann::ordered_json::object();
    for (const auto& [k, v] : m.metrics) met[k] = std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json();
    j["metrics"] = met;
    j["warnings"] = m.warnings;
    return j.dump(2) + "\n";
}

}  // namespace outskirt::pipeline

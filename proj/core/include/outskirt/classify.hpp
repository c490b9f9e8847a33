#pragma once

// Binary classifiers over latent vectors: inliers are the positive class,
// synthetic outliers the negative one. Every classifier exposes a signed
// decision score (> 0 means inlier) that also feeds the ROC computation.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <variant>

#include <Eigen/Dense>

#include "outskirt/nnet.hpp"
#include "outskirt/svm.hpp"

namespace outskirt::classify {

/// Gaussian naive Bayes with per-class diagonal variances.
struct GaussianNaiveBayes {
    Eigen::VectorXd mean_pos, var_pos, mean_neg, var_neg;
    double log_prior_pos = 0.0;
    double log_prior_neg = 0.0;

    /// log P(inlier | x) - log P(outlier | x).
    double decision(const Eigen::VectorXd& x) const;
    double posterior(const Eigen::VectorXd& x) const;
    Eigen::VectorXd decision_scores(const Matrix& x) const;
};

inline constexpr double kNbVarianceFloor = 1e-9;

GaussianNaiveBayes nb_fit(const Matrix& pos, const Matrix& neg);

struct MlpSpec {
    std::size_t hidden = 32;
    nnet::TrainConfig train{1e-2, 64, 200, nnet::OptimizerKind::adam, 0};
};

/// Two-layer relu network with a sigmoid output trained on BCE; the score
/// is the output logit.
struct MlpClassifier {
    nnet::DenseNet net;

    Eigen::VectorXd decision_scores(const Matrix& x) const;
};

MlpClassifier mlp_fit(const Matrix& pos, const Matrix& neg, const MlpSpec& spec);

using Classifier = std::variant<SvmModel, OneClassSvm, GaussianNaiveBayes, MlpClassifier>;

enum class ClassifierKind { svm, ocsvm, nb, mlp };

ClassifierKind parse_classifier(std::string_view name);
std::string_view to_string(ClassifierKind k);
ClassifierKind kind_of(const Classifier& c);

Eigen::VectorXd decision_scores(const Classifier& c, const Matrix& x);

/// False only for an SVM whose solver hit its iteration cap.
bool converged(const Classifier& c);

}  // namespace outskirt::classify

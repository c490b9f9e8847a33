#include "outskirt/classify.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "outskirt/error.hpp"

namespace outskirt::classify {

namespace {

void check_two_classes(const Matrix& pos, const Matrix& neg, const char* who) {
    if (pos.rows() == 0 || neg.rows() == 0) {
        throw DataError(std::string(who) + " needs samples from both classes");
    }
    if (pos.cols() != neg.cols()) throw DataError(std::string(who) + ": class dimensions differ");
}

double log_gaussian(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::VectorXd& var) {
    double acc = 0.0;
    for (Eigen::Index d = 0; d < x.size(); ++d) {
        const double dev = x[d] - mean[d];
        acc -= 0.5 * (std::log(2.0 * std::numbers::pi * var[d]) + dev * dev / var[d]);
    }
    return acc;
}

}  // namespace

double GaussianNaiveBayes::decision(const Eigen::VectorXd& x) const {
    return log_prior_pos + log_gaussian(x, mean_pos, var_pos) - log_prior_neg -
           log_gaussian(x, mean_neg, var_neg);
}

double GaussianNaiveBayes::posterior(const Eigen::VectorXd& x) const {
    const double d = decision(x);
    return d >= 0 ? 1.0 / (1.0 + std::exp(-d)) : std::exp(d) / (1.0 + std::exp(d));
}

Eigen::VectorXd GaussianNaiveBayes::decision_scores(const Matrix& x) const {
    if (x.cols() != mean_pos.size()) throw ConfigError("naive bayes: input dimension mismatch");
    Eigen::VectorXd s(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) s[r] = decision(x.row(r).transpose());
    return s;
}

GaussianNaiveBayes nb_fit(const Matrix& pos, const Matrix& neg) {
    check_two_classes(pos, neg, "naive bayes");
    GaussianNaiveBayes nb;
    auto stats = [](const Matrix& m, Eigen::VectorXd& mean, Eigen::VectorXd& var) {
        mean = m.colwise().mean().transpose();
        var = (m.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
        var = var.cwiseMax(kNbVarianceFloor);
    };
    stats(pos, nb.mean_pos, nb.var_pos);
    stats(neg, nb.mean_neg, nb.var_neg);
    const double n = static_cast<double>(pos.rows() + neg.rows());
    nb.log_prior_pos = std::log(static_cast<double>(pos.rows()) / n);
    nb.log_prior_neg = std::log(static_cast<double>(neg.rows()) / n);
    return nb;
}

Eigen::VectorXd MlpClassifier::decision_scores(const Matrix& x) const {
    return net.forward_logits(x).col(0);
}

MlpClassifier mlp_fit(const Matrix& pos, const Matrix& neg, const MlpSpec& spec) {
    check_two_classes(pos, neg, "mlp");
    if (spec.hidden < 1) throw ConfigError("mlp.hidden must be >= 1");
    const auto d = static_cast<std::size_t>(pos.cols());
    const std::vector<std::size_t> sizes{d, spec.hidden, 1};
    const std::vector<nnet::Activation> acts{nnet::Activation::relu, nnet::Activation::sigmoid};

    MlpClassifier clf;
    clf.net = nnet::DenseNet::glorot(sizes, acts, spec.train.seed);
    Matrix x(pos.rows() + neg.rows(), pos.cols());
    x.topRows(pos.rows()) = pos;
    x.bottomRows(neg.rows()) = neg;
    Matrix t(x.rows(), 1);
    t.topRows(pos.rows()).setOnes();
    t.bottomRows(neg.rows()).setZero();
    nnet::train(clf.net, x, t, nnet::Loss::bce, spec.train);
    return clf;
}

ClassifierKind parse_classifier(std::string_view name) {
    if (name == "svm") return ClassifierKind::svm;
    if (name == "ocsvm") return ClassifierKind::ocsvm;
    if (name == "nb") return ClassifierKind::nb;
    if (name == "mlp") return ClassifierKind::mlp;
    throw ConfigError("unknown classifier '" + std::string(name) + "' (expected svm, ocsvm, nb or mlp)");
}

std::string_view to_string(ClassifierKind k) {
    switch (k) {
        case ClassifierKind::svm: return "svm";
        case ClassifierKind::ocsvm: return "ocsvm";
        case ClassifierKind::nb: return "nb";
        case ClassifierKind::mlp: return "mlp";
    }
    return "?";
}

ClassifierKind kind_of(const Classifier& c) {
    switch (c.index()) {
        case 0: return ClassifierKind::svm;
        case 1: return ClassifierKind::ocsvm;
        case 2: return ClassifierKind::nb;
        default: return ClassifierKind::mlp;
    }
}

Eigen::VectorXd decision_scores(const Classifier& c, const Matrix& x) {
    return std::visit([&](const auto& model) { return model.decision_scores(x); }, c);
}

bool converged(const Classifier& c) {
    if (const auto* s = std::get_if<SvmModel>(&c)) return s->converged;
    if (const auto* s = std::get_if<OneClassSvm>(&c)) return s->converged;
    return true;
}

}  // namespace outskirt::classify

#include "outskirt/svm.hpp"

#include <cmath>
#include <limits>
#include <list>
#include <string>

#include "outskirt/error.hpp"

namespace outskirt::classify {

KernelType parse_kernel(std::string_view name) {
    if (name == "linear") return KernelType::linear;
    if (name == "poly") return KernelType::poly;
    if (name == "rbf") return KernelType::rbf;
    if (name == "sigmoid") return KernelType::sigmoid;
    throw ConfigError("unknown kernel '" + std::string(name) + "' (expected linear, poly, rbf or sigmoid)");
}

std::string_view to_string(KernelType k) {
    switch (k) {
        case KernelType::linear: return "linear";
        case KernelType::poly: return "poly";
        case KernelType::rbf: return "rbf";
        case KernelType::sigmoid: return "sigmoid";
    }
    return "?";
}

double KernelSpec::operator()(const double* a, const double* b, std::size_t dim) const {
    switch (type) {
        case KernelType::rbf: {
            double d2 = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                const double t = a[i] - b[i];
                d2 += t * t;
            }
            return std::exp(-gamma * d2);
        }
        default: break;
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < dim; ++i) dot += a[i] * b[i];
    switch (type) {
        case KernelType::linear: return dot;
        case KernelType::poly: return std::pow(gamma * dot + coef0, degree);
        case KernelType::sigmoid: return std::tanh(gamma * dot + coef0);
        default: return 0.0;
    }
}

namespace {

/// LRU cache of kernel-matrix rows.
class KernelCache {
public:
    KernelCache(const Matrix& x, const KernelSpec& k, std::size_t cache_mb)
        : x_(x), k_(k), n_(static_cast<std::size_t>(x.rows())), rows_(n_), where_(n_) {
        const std::size_t row_bytes = std::max<std::size_t>(1, n_ * sizeof(double));
        capacity_ = std::max<std::size_t>(2, cache_mb * 1024 * 1024 / row_bytes);
    }

    const std::vector<double>& row(std::size_t i) {
        if (!rows_[i].empty()) {
            lru_.splice(lru_.begin(), lru_, where_[i]);
            return rows_[i];
        }
        if (lru_.size() >= capacity_) {
            const auto victim = lru_.back();
            lru_.pop_back();
            rows_[victim].clear();
            rows_[victim].shrink_to_fit();
        }
        auto& r = rows_[i];
        r.resize(n_);
        const auto dim = static_cast<std::size_t>(x_.cols());
        for (std::size_t j = 0; j < n_; ++j) r[j] = k_(x_.row(i).data(), x_.row(j).data(), dim);
        lru_.push_front(i);
        where_[i] = lru_.begin();
        return r;
    }

    double diag(std::size_t i) const {
        const auto dim = static_cast<std::size_t>(x_.cols());
        return k_(x_.row(i).data(), x_.row(i).data(), dim);
    }

private:
    const Matrix& x_;
    KernelSpec k_;
    std::size_t n_;
    std::size_t capacity_;
    std::vector<std::vector<double>> rows_;
    std::list<std::size_t> lru_;
    std::vector<std::list<std::size_t>::iterator> where_;
};

struct Problem {
    const Matrix& x;
    Eigen::VectorXd y;
    Eigen::VectorXd p;
    Eigen::VectorXd upper;
    Eigen::VectorXd alpha;
};

struct Solution {
    Eigen::VectorXd alpha;
    double rho = 0.0;
    bool converged = true;
    std::size_t iterations = 0;
};

Solution solve(Problem prob, const KernelSpec& kernel, const SolverOptions& opts) {
    constexpr double tau = 1e-12;
    const auto n = static_cast<std::size_t>(prob.x.rows());
    KernelCache cache(prob.x, kernel, opts.cache_mb);
    auto& a = prob.alpha;
    const auto& y = prob.y;
    const auto& c = prob.upper;

    Eigen::VectorXd qd(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) qd[static_cast<Eigen::Index>(i)] = cache.diag(i);

    Eigen::VectorXd g = prob.p;
    for (std::size_t i = 0; i < n; ++i) {
        if (a[static_cast<Eigen::Index>(i)] == 0.0) continue;
        const auto& ki = cache.row(i);
        const double ai = a[static_cast<Eigen::Index>(i)];
        for (std::size_t j = 0; j < n; ++j) {
            g[static_cast<Eigen::Index>(j)] += ai * y[static_cast<Eigen::Index>(i)] *
                                               y[static_cast<Eigen::Index>(j)] * ki[j];
        }
    }

    auto at_upper = [&](Eigen::Index t) { return a[t] >= c[t]; };
    auto at_lower = [&](Eigen::Index t) { return a[t] <= 0.0; };

    Solution sol;
    const std::size_t max_iter = opts.max_passes * std::max<std::size_t>(n, 1);
    sol.converged = false;
    std::size_t iter = 0;
    for (; iter < max_iter; ++iter) {
        double gmax = -std::numeric_limits<double>::infinity();
        double gmin = std::numeric_limits<double>::infinity();
        Eigen::Index i = -1, j = -1;
        for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(n); ++t) {
            const double v = -y[t] * g[t];
            const bool up = y[t] > 0 ? !at_upper(t) : !at_lower(t);
            const bool low = y[t] > 0 ? !at_lower(t) : !at_upper(t);
            if (up && v > gmax) {
                gmax = v;
                i = t;
            }
            if (low && v < gmin) {
                gmin = v;
                j = t;
            }
        }
        if (i < 0 || j < 0 || gmax - gmin < opts.tolerance) {
            sol.converged = true;
            break;
        }

        const auto& ki = cache.row(static_cast<std::size_t>(i));
        const auto& kj = cache.row(static_cast<std::size_t>(j));
        const double qij = y[i] * y[j] * ki[static_cast<std::size_t>(j)];
        const double ci = c[i], cj = c[j];
        const double old_ai = a[i], old_aj = a[j];

        if (y[i] != y[j]) {
            double quad = qd[i] + qd[j] + 2.0 * qij;
            if (quad <= 0) quad = tau;
            const double delta = (-g[i] - g[j]) / quad;
            const double diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if (diff > 0) {
                if (a[j] < 0) {
                    a[j] = 0;
                    a[i] = diff;
                }
            } else if (a[i] < 0) {
                a[i] = 0;
                a[j] = -diff;
            }
            if (diff > ci - cj) {
                if (a[i] > ci) {
                    a[i] = ci;
                    a[j] = ci - diff;
                }
            } else if (a[j] > cj) {
                a[j] = cj;
                a[i] = cj + diff;
            }
        } else {
            double quad = qd[i] + qd[j] - 2.0 * qij;
            if (quad <= 0) quad = tau;
            const double delta = (g[i] - g[j]) / quad;
            const double sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if (sum > ci) {
                if (a[i] > ci) {
                    a[i] = ci;
                    a[j] = sum - ci;
                }
            } else if (a[j] < 0) {
                a[j] = 0;
                a[i] = sum;
            }
            if (sum > cj) {
                if (a[j] > cj) {
                    a[j] = cj;
                    a[i] = sum - cj;
                }
            } else if (a[i] < 0) {
                a[i] = 0;
                a[j] = sum;
            }
        }

        const double dai = a[i] - old_ai, daj = a[j] - old_aj;
        for (std::size_t t = 0; t < n; ++t) {
            const auto tt = static_cast<Eigen::Index>(t);
            g[tt] += y[tt] * (y[i] * ki[t] * dai + y[j] * kj[t] * daj);
        }
    }
    sol.iterations = iter;

    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    std::size_t n_free = 0;
    for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(n); ++t) {
        const double yg = y[t] * g[t];
        if (at_upper(t)) {
            if (y[t] < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (at_lower(t)) {
            if (y[t] > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    sol.rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
    sol.alpha = a;
    return sol;
}

void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) throw DataError(std::string(what) + " contains non-finite values");
}

}  // namespace

double SvmModel::decision(const double* x) const {
    double f = bias;
    const auto d = dim();
    for (Eigen::Index i = 0; i < support_vectors.rows(); ++i) {
        f += dual_coef[i] * labels[i] * kernel(support_vectors.row(i).data(), x, d);
    }
    return f;
}

Eigen::VectorXd SvmModel::decision_scores(const Matrix& x) const {
    if (static_cast<std::size_t>(x.cols()) != dim()) throw ConfigError("svm: input dimension mismatch");
    Eigen::VectorXd s(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) s[r] = decision(x.row(r).data());
    return s;
}

SvmModel svm_fit(const Matrix& pos, const Matrix& neg, const KernelSpec& kernel, double C,
                 const SolverOptions& opts) {
    if (pos.rows() == 0 || neg.rows() == 0) throw DataError("svm needs samples from both classes");
    if (pos.cols() != neg.cols()) throw DataError("svm: class dimensions differ");
    if (!(C > 0.0)) throw ConfigError("svm.C must be positive");
    if (!(kernel.gamma > 0.0)) throw ConfigError("svm.gamma must be positive");
    require_finite(pos, "positive samples");
    require_finite(neg, "negative samples");

    const auto n = pos.rows() + neg.rows();
    Matrix x(n, pos.cols());
    x.topRows(pos.rows()) = pos;
    x.bottomRows(neg.rows()) = neg;
    Eigen::VectorXd y(n);
    y.head(pos.rows()).setOnes();
    y.tail(neg.rows()).setConstant(-1.0);

    Problem prob{x, y, Eigen::VectorXd::Constant(n, -1.0), Eigen::VectorXd::Constant(n, C),
                 Eigen::VectorXd::Zero(n)};
    const auto sol = solve(std::move(prob), kernel, opts);

    SvmModel m;
    m.kernel = kernel;
    m.C = C;
    m.bias = -sol.rho;
    m.converged = sol.converged;
    m.iterations = sol.iterations;
    std::vector<Eigen::Index> sv;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (sol.alpha[i] > 0.0) sv.push_back(i);
    }
    m.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), x.cols());
    m.dual_coef.resize(static_cast<Eigen::Index>(sv.size()));
    m.labels.resize(static_cast<Eigen::Index>(sv.size()));
    for (std::size_t k = 0; k < sv.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        m.support_vectors.row(kk) = x.row(sv[k]);
        m.dual_coef[kk] = sol.alpha[sv[k]];
        m.labels[kk] = y[sv[k]];
    }
    return m;
}

double OneClassSvm::decision(const double* x) const {
    double f = -rho;
    const auto d = static_cast<std::size_t>(support_vectors.cols());
    for (Eigen::Index i = 0; i < support_vectors.rows(); ++i) {
        f += dual_coef[i] * kernel(support_vectors.row(i).data(), x, d);
    }
    return f;
}

Eigen::VectorXd OneClassSvm::decision_scores(const Matrix& x) const {
    if (x.cols() != support_vectors.cols()) throw ConfigError("one-class svm: input dimension mismatch");
    Eigen::VectorXd s(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) s[r] = decision(x.row(r).data());
    return s;
}

OneClassSvm one_class_fit(const Matrix& pos, const KernelSpec& kernel, double nu,
                          const SolverOptions& opts) {
    if (pos.rows() < 2) throw DataError("one-class svm needs at least 2 samples");
    if (!(nu > 0.0 && nu <= 1.0)) throw ConfigError("ocsvm.nu must be in (0, 1]");
    if (!(kernel.gamma > 0.0)) throw ConfigError("svm.gamma must be positive");
    require_finite(pos, "training samples");

    const auto n = pos.rows();
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
    const double total = nu * static_cast<double>(n);
    const auto whole = static_cast<Eigen::Index>(total);
    for (Eigen::Index i = 0; i < whole && i < n; ++i) alpha[i] = 1.0;
    if (whole < n) alpha[whole] = total - static_cast<double>(whole);

    Problem prob{pos, Eigen::VectorXd::Ones(n), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Ones(n),
                 alpha};
    const auto sol = solve(std::move(prob), kernel, opts);

    OneClassSvm m;
    m.kernel = kernel;
    m.nu = nu;
    m.rho = sol.rho;
    m.converged = sol.converged;
    std::vector<Eigen::Index> sv;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (sol.alpha[i] > 0.0) sv.push_back(i);
    }
    m.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), pos.cols());
    m.dual_coef.resize(static_cast<Eigen::Index>(sv.size()));
    for (std::size_t k = 0; k < sv.size(); ++k) {
        m.support_vectors.row(static_cast<Eigen::Index>(k)) = pos.row(sv[k]);
        m.dual_coef[static_cast<Eigen::Index>(k)] = sol.alpha[sv[k]];
    }
    return m;
}

}  // namespace outskirt::classify

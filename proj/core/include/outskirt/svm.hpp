#pragma once

// Kernel SVMs trained with SMO.
//
// The solver handles the generic dual
//     min_a  0.5 a^T Q a + p^T a   s.t.  y^T a = const,  0 <= a_i <= C_i
// with Q_ij = y_i y_j K(x_i, x_j), picking the maximal KKT-violating pair at
// every step. C-SVC uses p = -1; the one-class SVM uses p = 0, y = +1 and
// C_i = 1 with sum(a) = nu * n.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "outskirt/nnet.hpp"

namespace outskirt::classify {

using nnet::Matrix;

enum class KernelType : std::uint8_t { linear = 0, poly = 1, rbf = 2, sigmoid = 3 };

KernelType parse_kernel(std::string_view name);
std::string_view to_string(KernelType k);

struct KernelSpec {
    KernelType type = KernelType::rbf;
    double gamma = 1.0;
    double coef0 = 0.0;
    int degree = 3;

    double operator()(const double* a, const double* b, std::size_t dim) const;
    bool operator==(const KernelSpec&) const = default;
};

struct SolverOptions {
    double tolerance = 1e-3;
    std::size_t max_passes = 10000;  // one pass = n pair updates
    std::size_t cache_mb = 64;
};

struct SvmModel {
    KernelSpec kernel;
    double C = 1.0;
    Matrix support_vectors;
    Eigen::VectorXd dual_coef;  // alpha_i (>= 0)
    Eigen::VectorXd labels;     // y_i in {-1, +1}
    double bias = 0.0;          // b in f(x) = sum alpha_i y_i K(x_i, x) + b
    bool converged = true;
    std::size_t iterations = 0;

    double decision(const double* x) const;
    Eigen::VectorXd decision_scores(const Matrix& x) const;
    std::size_t dim() const { return static_cast<std::size_t>(support_vectors.cols()); }
};

/// `pos` get label +1 (inliers), `neg` label -1.
SvmModel svm_fit(const Matrix& pos, const Matrix& neg, const KernelSpec& kernel, double C,
                 const SolverOptions& opts = {});

/// nu-style one-class SVM; decision = sum alpha_i K(x_i, x) - rho.
struct OneClassSvm {
    KernelSpec kernel;
    double nu = 0.1;
    Matrix support_vectors;
    Eigen::VectorXd dual_coef;
    double rho = 0.0;
    bool converged = true;

    double decision(const double* x) const;
    Eigen::VectorXd decision_scores(const Matrix& x) const;
};

OneClassSvm one_class_fit(const Matrix& pos, const KernelSpec& kernel, double nu,
                          const SolverOptions& opts = {});

}  // namespace outskirt::classify

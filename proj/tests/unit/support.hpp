#pragma once

#include <cmath>
#include <functional>
#include <random>

#include <Eigen/Dense>

#include "outskirt/nnet.hpp"

namespace testing {

using outskirt::nnet::Matrix;

inline Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 e(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(e);
    return m;
}

// Central difference of f with respect to *x.
inline double central_diff(double* x, const std::function<double()>& f, double h = 1e-5) {
    const double saved = *x;
    *x = saved + h;
    const double up = f();
    *x = saved - h;
    const double down = f();
    *x = saved;
    return (up - down) / (2.0 * h);
}

// |a - b| <= rtol * max(|a|, |b|) + atol
inline bool close(double a, double b, double rtol, double atol = 1e-8) {
    return std::abs(a - b) <= rtol * std::max(std::abs(a), std::abs(b)) + atol;
}

}  // namespace testing

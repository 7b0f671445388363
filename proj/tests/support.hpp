#pragma once

#include <Eigen/Dense>

#include "feasrop/random.hpp"
#include "feasrop/spectral.hpp"

namespace feasrop::testing {

inline SymMatrix random_sym(Index n, Rng& rng) { return SymMatrix::from_dense(rng.normal_matrix(n, n)); }

inline SymMatrix random_psd(Index n, Index k, Rng& rng) {
  const Eigen::MatrixXd g = rng.normal_matrix(n, k);
  return SymMatrix::from_dense(g * g.transpose());
}

inline double rel_diff(const SymMatrix& a, const SymMatrix& b) {
  return (a - b).frobenius_norm() / std::max(1.0, b.frobenius_norm());
}

inline double rel_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace feasrop::testing

// Copyright 2026 The tpmove Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "tpmove/gaussian.hpp"

namespace testing {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using tpmove::Index;

inline VectorXd random_vector(std::mt19937_64& rng, Index n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

inline MatrixXd random_matrix(std::mt19937_64& rng, Index r, Index c, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  MatrixXd m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = normal(rng);
  return m;
}

// Eigenvalues roughly in [lo, lo + spread].
inline MatrixXd random_spd(std::mt19937_64& rng, Index n, double lo = 0.1, double spread = 1.0) {
  const MatrixXd q = Eigen::HouseholderQR<MatrixXd>(random_matrix(rng, n, n)).householderQ();
  std::uniform_real_distribution<double> u(lo, lo + spread);
  VectorXd ev(n);
  for (Index i = 0; i < n; ++i) ev(i) = u(rng);
  MatrixXd s = q * ev.asDiagonal() * q.transpose();
  return 0.5 * (s + s.transpose());
}

inline tpmove::Gaussian random_gaussian(std::mt19937_64& rng, Index n) {
  return {random_vector(rng, n), random_spd(rng, n)};
}

inline MatrixXd random_rotation(std::mt19937_64& rng, Index n) {
  MatrixXd q = Eigen::HouseholderQR<MatrixXd>(random_matrix(rng, n, n)).householderQ();
  if (q.determinant() < 0) q.col(0) *= -1.0;
  return q;
}

inline double max_abs(const MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace testing

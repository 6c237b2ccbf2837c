// Copyright 2026 The tpmove Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace tpmove {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Index = Eigen::Index;

/// Multivariate normal N(mean, covariance).
struct Gaussian {
  VectorXd mean;
  MatrixXd covariance;

  Gaussian() = default;
  Gaussian(VectorXd m, MatrixXd c);

  Index dim() const { return mean.size(); }
  /// Inverse covariance; throws SingularCovariance if not positive definite.
  MatrixXd precision() const;
  double log_density(const VectorXd& x) const;
};

/// Gaussian mixture. Weights lie on the simplex and all components share
/// one dimension.
struct GMM {
  VectorXd weights;
  std::vector<Gaussian> components;

  GMM() = default;
  GMM(VectorXd w, std::vector<Gaussian> comps);

  Index size() const { return static_cast<Index>(components.size()); }
  Index dim() const { return components.empty() ? 0 : components.front().dim(); }
};

/// Partition of the dimensions into conditioning inputs and regressed outputs.
struct BlockSpec {
  std::vector<Index> input_dims;
  std::vector<Index> output_dims;

  BlockSpec() = default;
  BlockSpec(std::vector<Index> in, std::vector<Index> out);

  Index dim() const {
    return static_cast<Index>(input_dims.size() + output_dims.size());
  }
  Index input_size() const { return static_cast<Index>(input_dims.size()); }
  Index output_size() const { return static_cast<Index>(output_dims.size()); }

  /// Time (dimension 0) as input, the remaining `output` dimensions as output.
  static BlockSpec time_input(Index output);
};

struct KMeansPlusPlusInit {
  std::uint64_t seed = 0;
};

/// Splits the points into K equal bins along the first dimension (time).
struct TimeBinsInit {};

using InitStrategy = std::variant<KMeansPlusPlusInit, TimeBinsInit>;

struct EmOptions {
  InitStrategy init = KMeansPlusPlusInit{};
  double reg = 1e-6;
  int max_iter = 200;
  /// Stop when the relative log-likelihood gain drops below this.
  double tol = 1e-8;
};

struct EmReport {
  GMM gmm;
  /// Log-likelihood after initialization, then after every EM iteration.
  std::vector<double> log_likelihood;
  int iterations = 0;
  bool converged = false;
  /// An M-step lowered the likelihood (possible only with reg > 0) and was
  /// discarded.
  bool stopped_on_decrease = false;
  double rejected_drop = 0.0;
};

/// Fits a K-component GMM to the rows of `data` (one point per row).
GMM em_fit(const MatrixXd& data, Index K, const EmOptions& options = {});
EmReport em_fit_report(const MatrixXd& data, Index K,
                       const EmOptions& options = {});

/// Sum over rows of log sum_k pi_k N(x | mu_k, Sigma_k).
double log_likelihood(const GMM& gmm, const MatrixXd& data);

/// Moment-matched Gaussian of p(x_O | x_I = input).
Gaussian gmr_condition(const GMM& gmm, const BlockSpec& spec,
                       const VectorXd& input);

/// Precomputes the per-component regression terms of a GMM so that repeated
/// conditioning only costs the responsibilities and a few products.
class GmrConditioner {
 public:
  GmrConditioner(const GMM& gmm, const BlockSpec& spec);

  Gaussian condition(const VectorXd& input) const;
  const BlockSpec& spec() const { return spec_; }

 private:
  struct Term {
    double log_weight;
    VectorXd mu_in;
    VectorXd mu_out;
    Eigen::LLT<MatrixXd> in_llt;
    double in_log_norm;  // -0.5 * (|I| log 2pi + log det Sigma_II)
    MatrixXd gain;       // Sigma_OI Sigma_II^-1
    MatrixXd cond_cov;   // Sigma_OO - gain Sigma_IO
  };
  BlockSpec spec_;
  std::vector<Term> terms_;
};

/// Normalized product of Gaussians: precisions add, means are
/// precision-weighted.
Gaussian gaussian_product(std::span<const Gaussian> factors);

/// Product where factor j has its covariance divided by confidence c_j.
Gaussian weighted_gaussian_product(std::span<const Gaussian> factors,
                                   std::span<const double> confidences);

/// Symmetric part of a square matrix.
MatrixXd symmetrize(const MatrixXd& m);

}  // namespace tpmove

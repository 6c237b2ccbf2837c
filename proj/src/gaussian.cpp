// Copyright 2026 The tpmove Authors
// SPDX-License-Identifier: Apache-2.0

#include "tpmove/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <string>

#include "tpmove/error.hpp"

namespace tpmove {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_sum_exp(const VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

// Cholesky of a covariance with its log normalizer.
struct Factor {
  Eigen::LLT<MatrixXd> llt;
  double log_norm = 0.0;
};

bool factorize(const MatrixXd& cov, Factor& out) {
  out.llt.compute(cov);
  if (out.llt.info() != Eigen::Success) return false;
  const VectorXd diag = out.llt.matrixLLT().diagonal();
  if ((diag.array() <= 0.0).any() || !diag.allFinite()) return false;
  const double log_det = 2.0 * diag.array().log().sum();
  out.log_norm = -0.5 * (static_cast<double>(cov.rows()) * kLog2Pi + log_det);
  return true;
}

double log_density(const Factor& f, const VectorXd& mean, const VectorXd& x) {
  const VectorXd z = f.llt.matrixL().solve(x - mean);
  return f.log_norm - 0.5 * z.squaredNorm();
}

void check_spec(const BlockSpec& spec, Index dim) {
  if (spec.dim() != dim) {
    throw Error(ErrorCode::DimensionMismatch,
                "block spec covers " + std::to_string(spec.dim()) +
                    " dims, model has " + std::to_string(dim));
  }
}

}  // namespace

MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

Gaussian::Gaussian(VectorXd m, MatrixXd c) : mean(std::move(m)), covariance(std::move(c)) {
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "covariance is " + std::to_string(covariance.rows()) + "x" +
                    std::to_string(covariance.cols()) + " for a mean of size " +
                    std::to_string(mean.size()));
  }
}

MatrixXd Gaussian::precision() const {
  Factor f;
  if (!factorize(covariance, f)) {
    throw Error(ErrorCode::SingularCovariance, "covariance is not positive definite");
  }
  return symmetrize(f.llt.solve(MatrixXd::Identity(dim(), dim())));
}

double Gaussian::log_density(const VectorXd& x) const {
  if (x.size() != dim()) throw Error(ErrorCode::DimensionMismatch, "point dimension");
  Factor f;
  if (!factorize(covariance, f)) {
    throw Error(ErrorCode::SingularCovariance, "covariance is not positive definite");
  }
  return tpmove::log_density(f, mean, x);
}

GMM::GMM(VectorXd w, std::vector<Gaussian> comps)
    : weights(std::move(w)), components(std::move(comps)) {
  if (weights.size() != static_cast<Index>(components.size())) {
    throw Error(ErrorCode::DimensionMismatch, "weights and components differ in count");
  }
  for (const auto& c : components) {
    if (c.dim() != components.front().dim()) {
      throw Error(ErrorCode::DimensionMismatch, "mixture components differ in dimension");
    }
  }
}

BlockSpec::BlockSpec(std::vector<Index> in, std::vector<Index> out)
    : input_dims(std::move(in)), output_dims(std::move(out)) {
  std::set<Index> seen;
  for (Index i : input_dims) seen.insert(i);
  for (Index o : output_dims) seen.insert(o);
  const auto d = static_cast<Index>(input_dims.size() + output_dims.size());
  if (static_cast<Index>(seen.size()) != d || (d > 0 && (*seen.begin() != 0 || *seen.rbegin() != d - 1))) {
    throw Error(ErrorCode::InvalidSpec, "input and output dims must partition 0..D-1");
  }
}

BlockSpec BlockSpec::time_input(Index output) {
  std::vector<Index> out(static_cast<std::size_t>(output));
  for (Index i = 0; i < output; ++i) out[static_cast<std::size_t>(i)] = i + 1;
  return BlockSpec({0}, std::move(out));
}

// ---------------------------------------------------------------------------
// EM

namespace {

struct EmState {
  VectorXd log_weights;
  std::vector<VectorXd> means;
  std::vector<MatrixXd> covs;
};

MatrixXd weighted_scatter(const MatrixXd& data, const VectorXd& w, const VectorXd& mean) {
  const MatrixXd centered = data.rowwise() - mean.transpose();
  return centered.transpose() * (centered.array().colwise() * w.array()).matrix();
}

Index count_distinct_rows(const MatrixXd& data) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(data.rows()));
  for (Index i = 0; i < data.rows(); ++i) {
    auto& row = rows[static_cast<std::size_t>(i)];
    row.reserve(static_cast<std::size_t>(data.cols()));
    for (Index j = 0; j < data.cols(); ++j) row.push_back(data(i, j));
  }
  std::sort(rows.begin(), rows.end());
  return static_cast<Index>(std::unique(rows.begin(), rows.end()) - rows.begin());
}

// Hard assignment -> initial mixture parameters.
EmState state_from_labels(const MatrixXd& data, const std::vector<Index>& labels, Index K,
                          double reg) {
  const Index n = data.rows();
  const VectorXd global_mean = data.colwise().mean();
  MatrixXd global_cov = weighted_scatter(data, VectorXd::Constant(n, 1.0 / static_cast<double>(n)), global_mean);
  global_cov.diagonal().array() += reg;

  EmState s;
  s.log_weights.resize(K);
  for (Index k = 0; k < K; ++k) {
    VectorXd w = VectorXd::Zero(n);
    for (Index i = 0; i < n; ++i) {
      if (labels[static_cast<std::size_t>(i)] == k) w(i) = 1.0;
    }
    const double nk = w.sum();
    s.log_weights(k) = std::log(nk / static_cast<double>(n));
    const VectorXd mean = (data.transpose() * w) / nk;
    MatrixXd cov;
    if (nk >= 2.0) {
      cov = weighted_scatter(data, w / nk, mean);
      cov.diagonal().array() += reg;
    } else {
      cov = global_cov;
    }
    s.means.push_back(mean);
    s.covs.push_back(symmetrize(cov));
  }
  return s;
}

std::vector<Index> kmeanspp_labels(const MatrixXd& data, Index K, std::uint64_t seed) {
  const Index n = data.rows();
  std::mt19937_64 rng(seed);
  std::vector<Index> centers;
  centers.push_back(static_cast<Index>(std::uniform_int_distribution<Index>(0, n - 1)(rng)));
  VectorXd d2(n);
  for (Index i = 0; i < n; ++i) d2(i) = (data.row(i) - data.row(centers[0])).squaredNorm();
  while (static_cast<Index>(centers.size()) < K) {
    const double total = d2.sum();
    if (total <= 0.0) break;
    const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
    Index pick = -1;
    double acc = 0.0;
    for (Index i = 0; i < n; ++i) {
      if (d2(i) <= 0.0) continue;
      pick = i;
      acc += d2(i);
      if (acc > u) break;
    }
    centers.push_back(pick);
    for (Index i = 0; i < n; ++i) {
      d2(i) = std::min(d2(i), (data.row(i) - data.row(pick)).squaredNorm());
    }
  }
  std::vector<Index> labels(static_cast<std::size_t>(n), 0);
  for (Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const double dist = (data.row(i) - data.row(centers[c])).squaredNorm();
      if (dist < best) {
        best = dist;
        labels[static_cast<std::size_t>(i)] = static_cast<Index>(c);
      }
    }
  }
  return labels;
}

std::vector<Index> time_bin_labels(const MatrixXd& data, Index K) {
  const Index n = data.rows();
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return data(a, 0) < data(b, 0); });
  std::vector<Index> labels(static_cast<std::size_t>(n));
  for (Index r = 0; r < n; ++r) {
    labels[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = std::min(K - 1, r * K / n);
  }
  return labels;
}

// E-step. Fills log-responsibilities and returns the data log-likelihood.
double expectation(const MatrixXd& data, const EmState& s, MatrixXd& log_resp) {
  const Index n = data.rows();
  const Index K = s.log_weights.size();
  log_resp.resize(n, K);
  for (Index k = 0; k < K; ++k) {
    Factor f;
    if (!factorize(s.covs[static_cast<std::size_t>(k)], f)) {
      throw Error(ErrorCode::SingularCovariance,
                  "component " + std::to_string(k) + " has a singular covariance");
    }
    const MatrixXd centered = (data.rowwise() - s.means[static_cast<std::size_t>(k)].transpose()).transpose();
    const MatrixXd z = f.llt.matrixL().solve(centered);
    log_resp.col(k) = (f.log_norm + s.log_weights(k)) - 0.5 * z.colwise().squaredNorm().transpose().array();
  }
  double ll = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double lse = log_sum_exp(log_resp.row(i).transpose());
    log_resp.row(i).array() -= lse;
    ll += lse;
  }
  return ll;
}

void maximization(const MatrixXd& data, const MatrixXd& log_resp, double reg, EmState& s) {
  const Index n = data.rows();
  const Index K = log_resp.cols();
  for (Index k = 0; k < K; ++k) {
    const VectorXd r = log_resp.col(k).array().exp();
    const double nk = r.sum();
    s.log_weights(k) = std::log(nk / static_cast<double>(n));
    if (nk < 1e-300) continue;  // empty component keeps its shape
    const VectorXd mean = (data.transpose() * r) / nk;
    MatrixXd cov = weighted_scatter(data, r / nk, mean);
    cov.diagonal().array() += reg;
    s.means[static_cast<std::size_t>(k)] = mean;
    s.covs[static_cast<std::size_t>(k)] = symmetrize(cov);
  }
}

GMM to_gmm(const EmState& s) {
  VectorXd w = s.log_weights.array().exp();
  w /= w.sum();
  std::vector<Gaussian> comps;
  for (std::size_t k = 0; k < s.means.size(); ++k) comps.emplace_back(s.means[k], s.covs[k]);
  return GMM(std::move(w), std::move(comps));
}

}  // namespace

EmReport em_fit_report(const MatrixXd& data, Index K, const EmOptions& options) {
  if (data.rows() == 0 || data.cols() == 0) throw Error(ErrorCode::EmptyData, "no data points");
  if (K < 1) throw Error(ErrorCode::InvalidSpec, "K must be at least 1");
  if (K > data.rows()) {
    throw Error(ErrorCode::KTooLarge, "K=" + std::to_string(K) + " exceeds " +
                                          std::to_string(data.rows()) + " points");
  }
  if (options.reg < 0.0) throw Error(ErrorCode::InvalidSpec, "negative regularization");
  if (K > 1 && count_distinct_rows(data) < K) {
    throw Error(ErrorCode::KTooLarge, "fewer distinct points than components");
  }

  std::vector<Index> labels;
  if (const auto* kpp = std::get_if<KMeansPlusPlusInit>(&options.init)) {
    labels = kmeanspp_labels(data, K, kpp->seed);
  } else {
    labels = time_bin_labels(data, K);
  }
  EmState state = state_from_labels(data, labels, K, options.reg);

  EmReport report;
  MatrixXd log_resp;
  double ll = expectation(data, state, log_resp);
  report.log_likelihood.push_back(ll);
  for (int it = 0; it < options.max_iter; ++it) {
    EmState prev = state;
    maximization(data, log_resp, options.reg, state);
    const double next = expectation(data, state, log_resp);
    // The regularized M-step is not an exact ascent step; near its fixed
    // point it can lose a little likelihood. Keep the previous model then.
    if (next < ll) {
      state = std::move(prev);
      report.stopped_on_decrease = true;
      report.rejected_drop = ll - next;
      report.converged = true;
      break;
    }
    report.log_likelihood.push_back(next);
    report.iterations = it + 1;
    if (next - ll < options.tol * std::abs(ll)) {
      report.converged = true;
      break;
    }
    ll = next;
  }
  report.gmm = to_gmm(state);
  return report;
}

GMM em_fit(const MatrixXd& data, Index K, const EmOptions& options) {
  return em_fit_report(data, K, options).gmm;
}

double log_likelihood(const GMM& gmm, const MatrixXd& data) {
  if (data.rows() == 0) return 0.0;
  if (data.cols() != gmm.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "data has " + std::to_string(data.cols()) +
                                                  " columns, model has " + std::to_string(gmm.dim()));
  }
  EmState s;
  s.log_weights = gmm.weights.array().log();
  for (const auto& c : gmm.components) {
    s.means.push_back(c.mean);
    s.covs.push_back(c.covariance);
  }
  MatrixXd log_resp;
  return expectation(data, s, log_resp);
}

// ---------------------------------------------------------------------------
// GMR

GmrConditioner::GmrConditioner(const GMM& gmm, const BlockSpec& spec) : spec_(spec) {
  check_spec(spec, gmm.dim());
  const auto& in = spec.input_dims;
  const auto& out = spec.output_dims;
  for (Index k = 0; k < gmm.size(); ++k) {
    const Gaussian& c = gmm.components[static_cast<std::size_t>(k)];
    Term t;
    t.log_weight = std::log(gmm.weights(k));
    t.mu_in = c.mean(in);
    t.mu_out = c.mean(out);
    const MatrixXd s_ii = c.covariance(in, in);
    const MatrixXd s_oi = c.covariance(out, in);
    Factor f;
    if (!factorize(s_ii, f)) {
      throw Error(ErrorCode::SingularInputBlock,
                  "input block of component " + std::to_string(k) + " is singular");
    }
    t.in_llt = f.llt;
    t.in_log_norm = f.log_norm;
    t.gain = t.in_llt.solve(s_oi.transpose()).transpose();
    t.cond_cov = symmetrize(c.covariance(out, out) - t.gain * s_oi.transpose());
    terms_.push_back(std::move(t));
  }
}

Gaussian GmrConditioner::condition(const VectorXd& input) const {
  if (input.size() != spec_.input_size()) {
    throw Error(ErrorCode::DimensionMismatch, "conditioning input has size " +
                                                  std::to_string(input.size()));
  }
  const auto K = static_cast<Index>(terms_.size());
  const Index dout = spec_.output_size();
  VectorXd logh(K);
  std::vector<VectorXd> means(static_cast<std::size_t>(K));
  for (Index k = 0; k < K; ++k) {
    const Term& t = terms_[static_cast<std::size_t>(k)];
    const VectorXd diff = input - t.mu_in;
    const VectorXd z = t.in_llt.matrixL().solve(diff);
    logh(k) = t.log_weight + t.in_log_norm - 0.5 * z.squaredNorm();
    means[static_cast<std::size_t>(k)] = t.mu_out + t.gain * diff;
  }
  const double lse = log_sum_exp(logh);
  VectorXd h = (logh.array() - lse).exp();
  if (!std::isfinite(lse)) h.setConstant(1.0 / static_cast<double>(K));

  VectorXd mean = VectorXd::Zero(dout);
  for (Index k = 0; k < K; ++k) mean += h(k) * means[static_cast<std::size_t>(k)];
  MatrixXd cov = MatrixXd::Zero(dout, dout);
  for (Index k = 0; k < K; ++k) {
    const VectorXd dm = means[static_cast<std::size_t>(k)] - mean;
    cov += h(k) * (terms_[static_cast<std::size_t>(k)].cond_cov + dm * dm.transpose());
  }
  return {std::move(mean), symmetrize(cov)};
}

Gaussian gmr_condition(const GMM& gmm, const BlockSpec& spec, const VectorXd& input) {
  return GmrConditioner(gmm, spec).condition(input);
}

// ---------------------------------------------------------------------------
// Products

Gaussian gaussian_product(std::span<const Gaussian> factors) {
  if (factors.empty()) throw Error(ErrorCode::EmptyFactorList, "product of no Gaussians");
  if (factors.size() == 1) return factors.front();
  const Index d = factors.front().dim();
  MatrixXd precision = MatrixXd::Zero(d, d);
  VectorXd info = VectorXd::Zero(d);
  for (const auto& f : factors) {
    if (f.dim() != d) throw Error(ErrorCode::DimensionMismatch, "factors differ in dimension");
    Eigen::LLT<MatrixXd> llt(f.covariance);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::SingularCovariance, "factor covariance is not positive definite");
    }
    const MatrixXd p = symmetrize(llt.solve(MatrixXd::Identity(d, d)));
    precision += p;
    info += p * f.mean;
  }
  Eigen::LLT<MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularCovariance, "summed precision is not positive definite");
  }
  MatrixXd cov = symmetrize(llt.solve(MatrixXd::Identity(d, d)));
  VectorXd mean = llt.solve(info);
  return {std::move(mean), std::move(cov)};
}

Gaussian weighted_gaussian_product(std::span<const Gaussian> factors,
                                   std::span<const double> confidences) {
  if (factors.empty()) throw Error(ErrorCode::EmptyFactorList, "product of no Gaussians");
  if (confidences.size() != factors.size()) {
    throw Error(ErrorCode::LengthMismatch, "one confidence per factor is required");
  }
  std::vector<Gaussian> scaled;
  scaled.reserve(factors.size());
  for (std::size_t j = 0; j < factors.size(); ++j) {
    const double c = confidences[j];
    if (!(c > 0.0 && c <= 1.0)) {
      throw Error(ErrorCode::ConfidenceOutOfRange,
                  "confidence " + std::to_string(c) + " outside (0, 1]");
    }
    scaled.emplace_back(factors[j].mean, factors[j].covariance / c);
  }
  return gaussian_product(scaled);
}

}  // namespace tpmove

// Copyright 2026 The tpmove Authors
// SPDX-License-Identifier: Apache-2.0

#include "tpmove/policy.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <thread>

#include "tpmove/error.hpp"

namespace tpmove {

// ---------------------------------------------------------------------------
// Basis and policy

BasisFamily BasisFamily::rbf(Index count, double width) {
  BasisFamily b;
  b.kind = BasisKind::Rbf;
  b.count = count;
  b.width = width;
  return b;
}

void BasisFamily::validate() const {
  if (kind == BasisKind::Rbf && count < 1) throw Error(ErrorCode::InvalidSpec, "RBF basis needs count >= 1");
  if (!std::isfinite(width)) throw Error(ErrorCode::InvalidSpec, "RBF width must be finite");
}

VectorXd BasisFamily::centers() const {
  if (kind == BasisKind::Constant) return {};
  if (count == 1) return VectorXd::Constant(1, 0.5);
  return VectorXd::LinSpaced(count, 0.0, 1.0);
}

VectorXd BasisFamily::evaluate(double t_norm) const {
  if (kind == BasisKind::Constant) return VectorXd::Ones(1);
  const VectorXd c = centers();
  const double s = width > 0.0 ? width : 1.0 / (2.0 * static_cast<double>(count));
  // Log-space normalization keeps far-from-center times finite.
  const VectorXd logits = -(c.array() - t_norm).square() / (2.0 * s * s);
  const VectorXd e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

void Policy::validate() const {
  basis.validate();
  if (frames < 1 || output_dim < 1) throw Error(ErrorCode::InvalidSpec, "policy needs frames and an output");
  if (theta.size() != parameter_count()) {
    throw Error(ErrorCode::LengthMismatch, "theta has " + std::to_string(theta.size()) +
                                               " entries, expected " + std::to_string(parameter_count()));
  }
  if (!theta.allFinite()) throw Error(ErrorCode::InvalidSpec, "theta must be finite");
}

VectorXd policy_action(const Policy& policy, double t_norm, const VectorXd& epsilon) {
  policy.validate();
  if (!(t_norm >= 0.0 && t_norm <= 1.0)) throw Error(ErrorCode::InvalidSpec, "t_norm must lie in [0, 1]");
  if (epsilon.size() != 0 && epsilon.size() != policy.theta.size()) {
    throw Error(ErrorCode::LengthMismatch, "epsilon does not match theta");
  }
  const VectorXd params = epsilon.size() == 0 ? policy.theta : VectorXd(policy.theta + epsilon);
  const VectorXd phi = policy.basis.evaluate(t_norm);
  const Index n = policy.block_size();
  VectorXd a = VectorXd::Zero(n);
  for (Index b = 0; b < phi.size(); ++b) a += phi(b) * params.segment(b * n, n);
  return a;
}

FreeMask full_mask(Index frames, Index output_dim) {
  return FreeMask(static_cast<std::size_t>(frames * adjustment_size(output_dim)), true);
}

FreeMask repeat_mask(const FreeMask& per_frame, Index frames) {
  FreeMask out;
  for (Index j = 0; j < frames; ++j) out.insert(out.end(), per_frame.begin(), per_frame.end());
  return out;
}

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double y = std::fmod(a + std::numbers::pi, two_pi);
  if (y <= 0.0) y += two_pi;
  return y - std::numbers::pi;
}

std::vector<FrameAdjustment> decode_adjustments(const VectorXd& a, Index frames,
                                                Index output_dim, const FreeMask& mask) {
  const Index per = adjustment_size(output_dim);
  if (a.size() != frames * per || static_cast<Index>(mask.size()) != frames * per) {
    throw Error(ErrorCode::LengthMismatch, "adjustment vector of " + std::to_string(a.size()) +
                                               " entries does not match " + std::to_string(frames) +
                                               " frames x " + std::to_string(per));
  }
  std::vector<FrameAdjustment> out;
  for (Index j = 0; j < frames; ++j) {
    FrameAdjustment adj = FrameAdjustment::zero(output_dim);
    for (Index i = 0; i < per; ++i) {
      const Index k = j * per + i;
      if (!mask[static_cast<std::size_t>(k)]) continue;
      if (i < 3) {
        adj.angles(i) = wrap_angle(a(k));
      } else {
        adj.displacement(i - 3) = a(k);
      }
    }
    out.push_back(std::move(adj));
  }
  return out;
}

// ---------------------------------------------------------------------------
// PI2 update

VectorXd pi2_weights(std::span<const double> costs, double kappa) {
  if (costs.size() < 2) throw Error(ErrorCode::InvalidSpec, "PI2 needs at least two rollouts");
  if (!(kappa > 0.0)) throw Error(ErrorCode::InvalidSpec, "kappa must be positive");
  for (double s : costs) {
    if (!std::isfinite(s)) throw Error(ErrorCode::NonFiniteCost, "rollout cost is not finite");
  }
  const auto [lo, hi] = std::minmax_element(costs.begin(), costs.end());
  const double range = *hi - *lo;
  const Index H = static_cast<Index>(costs.size());
  VectorXd w(H);
  for (Index h = 0; h < H; ++h) {
    const double s = range > 0.0 ? (costs[static_cast<std::size_t>(h)] - *lo) / range : 0.0;
    w(h) = std::exp(-kappa * s);
  }
  return w / w.sum();
}

VectorXd pi2_update(const VectorXd& theta, std::span<const Rollout> rollouts, double kappa) {
  std::vector<double> costs;
  for (const auto& r : rollouts) {
    if (r.epsilon.size() != theta.size()) throw Error(ErrorCode::LengthMismatch, "epsilon does not match theta");
    costs.push_back(r.cost);
  }
  const VectorXd w = pi2_weights(costs, kappa);
  VectorXd next = theta;
  for (std::size_t h = 0; h < rollouts.size(); ++h) next += w(static_cast<Index>(h)) * rollouts[h].epsilon;
  return next;
}

// ---------------------------------------------------------------------------
// Configuration

void OptimizerConfig::validate() const {
  if (H < 2) throw Error(ErrorCode::InvalidSpec, "H must be at least 2");
  if (!(kappa > 0.0)) throw Error(ErrorCode::InvalidSpec, "kappa must be positive");
  if (noise_std.size() == 0 || !noise_std.allFinite() || (noise_std.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidSpec, "noise_std must be finite and non-negative");
  }
  if (total_rollouts < H) {
    throw Error(ErrorCode::BudgetTooSmall, "budget of " + std::to_string(total_rollouts) +
                                               " rollouts is below H = " + std::to_string(H));
  }
  if (eval_noise_free_every < 1) throw Error(ErrorCode::InvalidSpec, "eval_noise_free_every must be >= 1");
  if (!(noise_decay > 0.0 && noise_decay <= 1.0)) throw Error(ErrorCode::InvalidSpec, "noise_decay must lie in (0, 1]");
  if (parallel < 1) throw Error(ErrorCode::InvalidSpec, "parallel must be >= 1");
}

VectorXd OptimizerConfig::expanded_noise(Index n, Index per_frame) const {
  if (noise_std.size() == 1) return VectorXd::Constant(n, noise_std(0));
  if (noise_std.size() == n) return noise_std;
  if (per_frame > 0 && noise_std.size() == per_frame && n % per_frame == 0) {
    return noise_std.replicate(n / per_frame, 1);
  }
  throw Error(ErrorCode::LengthMismatch, "noise_std has " + std::to_string(noise_std.size()) +
                                             " entries for " + std::to_string(n) + " parameters");
}

Index OptimizationProblem::output_dim() const {
  return models.empty() ? 0 : models.front().spec.output_size();
}

void OptimizationProblem::validate() const {
  if (models.empty()) throw Error(ErrorCode::EmptyData, "no local models");
  if (models.size() != frames.size()) {
    throw Error(ErrorCode::FrameCountMismatch, std::to_string(models.size()) + " models for " +
                                                   std::to_string(frames.size()) + " frames");
  }
  const Index P = static_cast<Index>(frames.size());
  if (static_cast<Index>(free_mask.size()) != P * adjustment_size(output_dim())) {
    throw Error(ErrorCode::LengthMismatch, "free mask needs " +
                                               std::to_string(P * adjustment_size(output_dim())) +
                                               " entries");
  }
  if (inputs.rows() < 2) throw Error(ErrorCode::EmptyData, "need at least two input steps");
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidSpec, "dt must be positive");
  if (output_dim() != arm.position_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "output block does not match the arm's position size");
  }
  arm.validate();
  cost.validate();
  basis.validate();
  if (q0.size() != arm.dof()) throw Error(ErrorCode::DimensionMismatch, "q0 size differs from the arm");
}

// ---------------------------------------------------------------------------
// Generic PI2 loop

namespace {

std::vector<Evaluation> evaluate_batch(const std::vector<VectorXd>& params, const EvaluateFn& evaluate,
                                       Index workers) {
  std::vector<Evaluation> out(params.size());
  if (workers <= 1 || params.size() < 2) {
    for (std::size_t h = 0; h < params.size(); ++h) out[h] = evaluate(params[h]);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(params.size());
  auto work = [&] {
    for (std::size_t h = next++; h < params.size(); h = next++) {
      try {
        out[h] = evaluate(params[h]);
      } catch (...) {
        errors[h] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(workers), params.size());
  for (std::size_t i = 0; i < n; ++i) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  // Report the first failure in rollout order so parallel runs fail like serial ones.
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace

OptimizationResult pi2_search(const VectorXd& theta0, const VectorXd& noise_std,
                              const OptimizerConfig& config, const EvaluateFn& evaluate) {
  config.validate();
  if (noise_std.size() != theta0.size()) throw Error(ErrorCode::LengthMismatch, "noise_std does not match theta");

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  OptimizationResult result;
  VectorXd theta = theta0;
  VectorXd sigma = noise_std;

  Evaluation best = evaluate(theta);
  if (!std::isfinite(best.cost)) throw Error(ErrorCode::NonFiniteCost, "initial cost is not finite");
  result.best_theta = theta;
  result.initial_cost = best.cost;
  result.best_cost = best.cost;
  result.cost_curve.push_back({0, 0, best.cost, std::numeric_limits<double>::quiet_NaN(),
                               std::numeric_limits<double>::quiet_NaN(), best.cost});

  const Index updates = config.total_rollouts / config.H;
  std::vector<Rollout> rollouts(static_cast<std::size_t>(config.H));
  std::vector<VectorXd> params(static_cast<std::size_t>(config.H));
  for (Index u = 1; u <= updates; ++u) {
    for (std::size_t h = 0; h < rollouts.size(); ++h) {
      VectorXd eps(theta.size());
      for (Index i = 0; i < eps.size(); ++i) eps(i) = sigma(i) * normal(rng);
      params[h] = theta + eps;
      rollouts[h].epsilon = std::move(eps);
    }
    std::vector<Evaluation> evals = evaluate_batch(params, evaluate, config.parallel);
    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t h = 0; h < rollouts.size(); ++h) {
      rollouts[h].cost = evals[h].cost;
      rollouts[h].trajectory = std::move(evals[h].trajectory);
      sum += evals[h].cost;
      lo = std::min(lo, evals[h].cost);
    }
    theta = pi2_update(theta, rollouts, config.kappa);
    sigma *= config.noise_decay;
    result.rollouts += config.H;

    if (u % config.eval_noise_free_every == 0 || u == updates) {
      Evaluation e = evaluate(theta);
      const double cost = e.cost;
      if (!std::isfinite(cost)) throw Error(ErrorCode::NonFiniteCost, "noise-free cost is not finite");
      if (cost < result.best_cost) {
        result.best_cost = cost;
        result.best_theta = theta;
        best = std::move(e);
      }
      result.cost_curve.push_back(
          {u, result.rollouts, cost, sum / static_cast<double>(config.H), lo, result.best_cost});
    }
  }
  result.final_trajectory = std::move(best.trajectory);
  result.final_joints = std::move(best.joints);
  return result;
}

// ---------------------------------------------------------------------------
// Frame-parameter search

Policy initial_policy(const OptimizationProblem& problem) {
  Policy p;
  p.basis = problem.basis;
  p.frames = static_cast<Index>(problem.frames.size());
  p.output_dim = problem.output_dim();
  p.theta = VectorXd::Zero(p.parameter_count());
  return p;
}

std::vector<TaskFrame> adjusted_frames(const OptimizationProblem& problem, const Policy& policy) {
  const Index P = policy.frames;
  const Index dout = policy.output_dim;
  const BlockSpec& spec = problem.models.front().spec;
  std::vector<TaskFrame> out;
  if (policy.basis.kind == BasisKind::Constant) {
    const auto adj = decode_adjustments(policy_action(policy, 0.0), P, dout, problem.free_mask);
    for (Index j = 0; j < P; ++j) {
      out.push_back(adjust_frame(problem.frames[static_cast<std::size_t>(j)], spec, adj[static_cast<std::size_t>(j)]));
    }
    return out;
  }
  const Index N = problem.inputs.rows();
  std::vector<std::vector<FrameAdjustment>> per_frame(static_cast<std::size_t>(P));
  for (Index t = 0; t < N; ++t) {
    const double tn = static_cast<double>(t) / static_cast<double>(N - 1);
    const auto adj = decode_adjustments(policy_action(policy, tn), P, dout, problem.free_mask);
    for (Index j = 0; j < P; ++j) per_frame[static_cast<std::size_t>(j)].push_back(adj[static_cast<std::size_t>(j)]);
  }
  for (Index j = 0; j < P; ++j) {
    out.push_back(adjust_frame_series(problem.frames[static_cast<std::size_t>(j)], spec,
                                      per_frame[static_cast<std::size_t>(j)]));
  }
  return out;
}

namespace {

Evaluation execute(const OptimizationProblem& problem, const std::vector<Gaussian>& fused) {
  Evaluation e;
  e.trajectory = mean_trajectory(fused);
  e.joints = track(problem.arm, problem.q0, e.trajectory, problem.damping);
  const MatrixXd executed = forward_kinematics(problem.arm, e.joints);
  e.cost = evaluate_cost(problem.cost, executed, e.joints, problem.dt);
  return e;
}

}  // namespace

Evaluation evaluate_frames(const OptimizationProblem& problem, std::span<const TaskFrame> frames) {
  return execute(problem, reproduce(problem.models, frames, problem.inputs, problem.confidences));
}

OptimizationResult optimize(const OptimizationProblem& problem, const OptimizerConfig& config,
                            const VectorXd& theta0) {
  problem.validate();
  config.validate();
  Policy base = initial_policy(problem);
  if (theta0.size() > 0) {
    if (theta0.size() != base.parameter_count()) {
      throw Error(ErrorCode::LengthMismatch, "theta0 does not match the policy size");
    }
    base.theta = theta0;
  }
  const Index per_frame = adjustment_size(base.output_dim);
  VectorXd noise = config.expanded_noise(base.parameter_count(), per_frame);
  for (Index i = 0; i < noise.size(); ++i) {
    if (!problem.free_mask[static_cast<std::size_t>(i % base.block_size())]) noise(i) = 0.0;
  }
  if ((noise.array() > 0.0).count() == 0 && (config.noise_std.array() > 0.0).any()) {
    throw Error(ErrorCode::InvalidSpec, "free mask selects no coordinate");
  }

  // Adjustments leave the input blocks alone, so the local conditionals are
  // fixed for the whole search and only the fusion is repeated.
  const auto local = local_trajectories(problem.models, problem.frames, problem.inputs);
  const BlockSpec& spec = problem.models.front().spec;
  const EvaluateFn evaluate = [&](const VectorXd& theta) {
    Policy p = base;
    p.theta = theta;
    const auto frames = adjusted_frames(problem, p);
    return execute(problem, fuse_local_trajectories(local, frames, spec, problem.confidences));
  };

  OptimizationResult result = pi2_search(base.theta, noise, config, evaluate);
  Policy best = base;
  best.theta = result.best_theta;
  result.final_frames = adjusted_frames(problem, best);
  result.final_models = problem.models;
  return result;
}

// ---------------------------------------------------------------------------
// GMM-mean baseline

Index searched_parameter_count(const OptimizationProblem& problem) {
  const auto free = std::count(problem.free_mask.begin(), problem.free_mask.end(), true);
  return static_cast<Index>(free) * problem.basis.size();
}

Index gmm_mean_parameter_count(std::span<const LocalModel> models) {
  Index n = 0;
  for (const auto& m : models) n += m.gmm.size() * m.spec.output_size();
  return n;
}

std::vector<LocalModel> offset_means(std::span<const LocalModel> models, const VectorXd& offsets) {
  if (offsets.size() != gmm_mean_parameter_count(models)) {
    throw Error(ErrorCode::LengthMismatch, "mean offsets do not match the models");
  }
  std::vector<LocalModel> out(models.begin(), models.end());
  Index k = 0;
  for (auto& m : out) {
    const Index dout = m.spec.output_size();
    for (auto& c : m.gmm.components) {
      for (Index i = 0; i < dout; ++i) c.mean(m.spec.output_dims[static_cast<std::size_t>(i)]) += offsets(k++);
    }
  }
  return out;
}

OptimizationResult optimize_gmm_means(const OptimizationProblem& problem,
                                      const OptimizerConfig& config) {
  problem.validate();
  config.validate();
  const Index n = gmm_mean_parameter_count(problem.models);
  const Index dout = problem.output_dim();
  const VectorXd noise = config.noise_std.size() == 1
                             ? VectorXd::Constant(n, config.noise_std(0))
                             : config.expanded_noise(n, dout);
  const EvaluateFn evaluate = [&](const VectorXd& offsets) {
    const auto models = offset_means(problem.models, offsets);
    return execute(problem, reproduce(models, problem.frames, problem.inputs, problem.confidences));
  };
  OptimizationResult result = pi2_search(VectorXd::Zero(n), noise, config, evaluate);
  result.final_frames = problem.frames;
  result.final_models = offset_means(problem.models, result.best_theta);
  return result;
}

}  // namespace tpmove

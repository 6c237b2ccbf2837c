// Copyright 2026 The tpmove Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "tpmove/costs.hpp"
#include "tpmove/kinematics.hpp"
#include "tpmove/task_frames.hpp"

namespace tpmove {

enum class BasisKind { Constant, Rbf };

/// Time basis over normalized time in [0, 1]. RBF bases are normalized so the
/// activations sum to one.
struct BasisFamily {
  BasisKind kind = BasisKind::Constant;
  Index count = 1;
  /// RBF standard deviation; <= 0 picks 1 / (2 count).
  double width = 0.0;

  static BasisFamily constant() { return {}; }
  static BasisFamily rbf(Index count, double width = 0.0);

  Index size() const { return kind == BasisKind::Constant ? 1 : count; }
  void validate() const;
  /// Centers of the RBFs (empty for the constant basis).
  VectorXd centers() const;
  VectorXd evaluate(double t_norm) const;
};

/// Adjustment coordinates per frame: 3 angles followed by D_O displacements.
inline Index adjustment_size(Index output_dim) { return 3 + output_dim; }

/// theta holds B blocks of P (3 + D_O) coordinates.
struct Policy {
  VectorXd theta;
  BasisFamily basis;
  Index frames = 0;
  Index output_dim = 0;

  Index block_size() const { return frames * adjustment_size(output_dim); }
  Index parameter_count() const { return basis.size() * block_size(); }
  void validate() const;
};

/// a_t = Phi(t_norm) (theta + epsilon). An empty epsilon means zero.
VectorXd policy_action(const Policy& policy, double t_norm, const VectorXd& epsilon = {});

/// Flattened per-frame mask, P (3 + D_O) entries in declaration order.
using FreeMask = std::vector<bool>;

FreeMask full_mask(Index frames, Index output_dim);
/// Repeats a single-frame mask for every frame.
FreeMask repeat_mask(const FreeMask& per_frame, Index frames);

/// Angles wrapped to (-pi, pi].
double wrap_angle(double a);

/// Splits a_t into per-frame adjustments; masked-out coordinates are zero.
std::vector<FrameAdjustment> decode_adjustments(const VectorXd& a, Index frames,
                                                Index output_dim, const FreeMask& mask);

struct Rollout {
  VectorXd epsilon;
  double cost = 0.0;
  MatrixXd trajectory;
};

/// exp(-kappa S~_h) / sum, S~ min-max normalized within the batch.
VectorXd pi2_weights(std::span<const double> costs, double kappa);
/// theta + sum_h w_h epsilon_h.
VectorXd pi2_update(const VectorXd& theta, std::span<const Rollout> rollouts, double kappa);

struct OptimizerConfig {
  Index H = 10;
  double kappa = 10.0;
  /// One entry (broadcast), one per adjustment coordinate of a frame
  /// (broadcast over frames and basis blocks), or one per parameter.
  VectorXd noise_std = VectorXd::Constant(1, 0.05);
  Index total_rollouts = 500;
  std::uint64_t seed = 0;
  /// Updates between noise-free evaluations.
  Index eval_noise_free_every = 1;
  /// Geometric factor applied to noise_std after every update.
  double noise_decay = 1.0;
  /// Worker threads for rollouts within an update.
  Index parallel = 1;

  void validate() const;
  /// noise_std expanded to n parameters given the per-frame block size.
  VectorXd expanded_noise(Index n, Index per_frame) const;
};

struct OptimizationProblem {
  std::vector<LocalModel> models;
  std::vector<TaskFrame> frames;
  /// Global input sequence, one row per step.
  MatrixXd inputs;
  double dt = 0.0;
  FreeMask free_mask;
  CostSpec cost;
  ArmModel arm;
  VectorXd q0;
  double damping = 1e-6;
  BasisFamily basis;
  std::optional<Confidences> confidences;

  Index output_dim() const;
  void validate() const;
};

struct CostCurveRow {
  Index update = 0;
  Index rollouts = 0;
  double noise_free_cost = 0.0;
  double batch_mean = 0.0;
  double batch_min = 0.0;
  double best_cost = 0.0;
};

struct OptimizationResult {
  VectorXd best_theta;
  double initial_cost = 0.0;
  double best_cost = 0.0;
  Index rollouts = 0;
  std::vector<CostCurveRow> cost_curve;
  std::vector<TaskFrame> final_frames;
  std::vector<LocalModel> final_models;
  MatrixXd final_trajectory;
  MatrixXd final_joints;
};

/// Outcome of one policy evaluation.
struct Evaluation {
  double cost = 0.0;
  MatrixXd trajectory;
  MatrixXd joints;
};

using EvaluateFn = std::function<Evaluation(const VectorXd& params)>;

/// PI2 over an arbitrary parameter vector. Coordinates with zero noise never
/// move. evaluate must be thread-safe when config.parallel > 1.
OptimizationResult pi2_search(const VectorXd& theta0, const VectorXd& noise_std,
                              const OptimizerConfig& config, const EvaluateFn& evaluate);

/// Frame-parameter search.
Policy initial_policy(const OptimizationProblem& problem);
/// Coordinates the search actually explores (free entries times basis size).
Index searched_parameter_count(const OptimizationProblem& problem);
std::vector<TaskFrame> adjusted_frames(const OptimizationProblem& problem, const Policy& policy);
Evaluation evaluate_frames(const OptimizationProblem& problem, std::span<const TaskFrame> frames);
/// theta0 (empty: zero adjustments) is the starting policy parameter vector.
OptimizationResult optimize(const OptimizationProblem& problem, const OptimizerConfig& config,
                            const VectorXd& theta0 = {});

/// Baseline: searches the output-block means of every component of every
/// model, frames fixed.
Index gmm_mean_parameter_count(std::span<const LocalModel> models);
std::vector<LocalModel> offset_means(std::span<const LocalModel> models, const VectorXd& offsets);
OptimizationResult optimize_gmm_means(const OptimizationProblem& problem,
                                      const OptimizerConfig& config);

}  // namespace tpmove

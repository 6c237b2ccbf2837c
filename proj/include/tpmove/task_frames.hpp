// Copyright 2026 The tpmove Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tpmove/gaussian.hpp"

namespace tpmove {

/// Affine task frame (A, b): local coordinates x map to global A x + b.
/// A frame is either static or carries one (A_t, b_t) pair per time step.
class TaskFrame {
 public:
  TaskFrame() = default;
  TaskFrame(MatrixXd A, VectorXd b);
  TaskFrame(std::vector<MatrixXd> A_t, std::vector<VectorXd> b_t);

  static TaskFrame identity(Index dim);
  /// A = I, translated by b.
  static TaskFrame translation(VectorXd b);

  bool is_static() const { return A_.size() == 1; }
  Index dim() const { return b_.empty() ? 0 : b_.front().size(); }
  /// Number of per-step parameter pairs (1 for a static frame).
  Index steps() const { return static_cast<Index>(A_.size()); }

  /// Parameters at step t. A static frame returns the same pair for all t.
  const MatrixXd& A(Index t = 0) const;
  const VectorXd& b(Index t = 0) const;

  /// Block views for a given input/output partition.
  MatrixXd A_in(const BlockSpec& spec, Index t = 0) const;
  MatrixXd A_out(const BlockSpec& spec, Index t = 0) const;
  VectorXd b_in(const BlockSpec& spec, Index t = 0) const;
  VectorXd b_out(const BlockSpec& spec, Index t = 0) const;

  /// Throws DimensionMismatch unless the cross blocks of every A_t are zero.
  void check_block_diagonal(const BlockSpec& spec) const;

 private:
  std::vector<MatrixXd> A_;
  std::vector<VectorXd> b_;
};

/// One demonstration: N rows of D-dimensional points sampled every dt seconds.
struct Demonstration {
  MatrixXd points;
  double dt = 0.0;

  Index steps() const { return points.rows(); }
  Index dim() const { return points.cols(); }
};

/// GMM fit to the demonstrations as seen from one task frame.
struct LocalModel {
  std::string frame_id;
  GMM gmm;
  BlockSpec spec;
};

/// Rotation angles (about x, y, z) and displacement applied to a frame's
/// output block.
struct FrameAdjustment {
  Eigen::Vector3d angles = Eigen::Vector3d::Zero();
  VectorXd displacement;

  static FrameAdjustment zero(Index output_dim);
};

/// Per-row A_t^-1 (x_t - b_t).
Demonstration project(const Demonstration& demo, const TaskFrame& frame);
/// Per-row A_t x_t + b_t.
Demonstration unproject(const Demonstration& demo, const TaskFrame& frame);

/// Fits one model per frame to the concatenated projections of all demos.
/// All demonstrations share each frame.
std::vector<LocalModel> fit_local_models(std::span<const Demonstration> demos,
                                         std::span<const TaskFrame> frames, Index K,
                                         const BlockSpec& spec, const EmOptions& em = {},
                                         std::span<const std::string> frame_ids = {});

/// Same, with frames[j][m] the frame j observed in demonstration m.
std::vector<LocalModel> fit_local_models(std::span<const Demonstration> demos,
                                         const std::vector<std::vector<TaskFrame>>& frames,
                                         Index K, const BlockSpec& spec,
                                         const EmOptions& em = {},
                                         std::span<const std::string> frame_ids = {});

/// GMR in the model's own frame. `inputs` holds one input vector per row.
std::vector<Gaussian> local_trajectory(const LocalModel& model, const MatrixXd& inputs);

/// Pushes a conditional over the output block through the frame at step t.
Gaussian transform_conditional(const Gaussian& g, const TaskFrame& frame,
                               const BlockSpec& spec, Index t = 0);

/// Per-step confidences: an N x P matrix, or 1 x P for constants.
using Confidences = MatrixXd;

Confidences constant_confidences(std::span<const double> per_frame);

/// Local conditionals per frame: [frame][step], each over the output block.
/// Inputs are given in global coordinates and mapped through each frame's
/// input block.
std::vector<std::vector<Gaussian>> local_trajectories(std::span<const LocalModel> models,
                                                      std::span<const TaskFrame> frames,
                                                      const MatrixXd& inputs);

/// Fuses precomputed local conditionals in the global frame.
std::vector<Gaussian> fuse_local_trajectories(
    const std::vector<std::vector<Gaussian>>& local, std::span<const TaskFrame> frames,
    const BlockSpec& spec, const std::optional<Confidences>& confidences = std::nullopt);

/// Full retrieval: condition each local model, map into the global frame, and
/// take the (confidence-weighted) product per step.
std::vector<Gaussian> reproduce(std::span<const LocalModel> models,
                                std::span<const TaskFrame> frames, const MatrixXd& inputs,
                                const std::optional<Confidences>& confidences = std::nullopt);

/// Means of a Gaussian sequence, one row per step.
MatrixXd mean_trajectory(std::span<const Gaussian> seq);

/// R = Rz(gamma) Ry(beta) Rx(alpha).
Eigen::Matrix3d rotation_from_angles(double alpha, double beta, double gamma);
/// Planar rotation by gamma.
Eigen::Matrix2d planar_rotation(double gamma);

/// Rotation block of the adjustment for an output dimension of 2 or 3.
MatrixXd adjustment_rotation(const FrameAdjustment& adj, Index output_dim);

/// A_O := A_O R, b_O := A_O d + b_O at step t (all steps for a static
/// frame). Input blocks are untouched.
TaskFrame adjust_frame(const TaskFrame& frame, const BlockSpec& spec,
                       const FrameAdjustment& adj, Index t = 0);

/// Applies one adjustment per step, producing a time-indexed frame.
TaskFrame adjust_frame_series(const TaskFrame& frame, const BlockSpec& spec,
                              std::span<const FrameAdjustment> adjustments);

/// Local model that, seen through `frame`, is identical to `model` seen
/// through `adjusted`.
LocalModel dual_model_transform(const LocalModel& model, const TaskFrame& frame,
                                const TaskFrame& adjusted, Index t = 0);

/// Components of a local model mapped into the global frame at step t.
GMM transform_model(const LocalModel& model, const TaskFrame& frame, Index t = 0);

/// Component-wise product of the per-frame models at step t. Weights are the
/// average of the per-frame mixture weights.
GMM global_components(std::span<const LocalModel> models, std::span<const TaskFrame> frames,
                      Index t = 0);

}  // namespace tpmove

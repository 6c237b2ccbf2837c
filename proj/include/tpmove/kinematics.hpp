// Copyright 2026 The tpmove Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>
#include <vector>

#include <Eigen/Geometry>

#include "tpmove/gaussian.hpp"

namespace tpmove {

enum class ArmVariant {
  /// Revolute joints about z, links along x; end-effector position is (x, y).
  Planar,
  /// Base yaw about z followed by pitch joints about y; position is (x, y, z).
  Spatial,
};

/// Serial chain of revolute joints. Joint i rotates about its axis and is
/// followed by a link of length link_lengths[i] along the local x axis.
struct ArmModel {
  std::vector<double> link_lengths;
  Eigen::Isometry3d base = Eigen::Isometry3d::Identity();
  /// Per-joint (min, max) in radians. Empty means unlimited.
  std::vector<std::pair<double, double>> joint_limits;
  ArmVariant variant = ArmVariant::Spatial;
  /// Rest posture, used to seed IK. Empty means all zeros.
  VectorXd home;

  Index dof() const { return static_cast<Index>(link_lengths.size()); }
  Index position_dim() const { return variant == ArmVariant::Planar ? 2 : 3; }
  double reach() const;

  /// Throws InvalidSpec on non-positive lengths or inverted limits.
  void validate() const;
  bool within_limits(const VectorXd& q) const;
  VectorXd clamp(const VectorXd& q) const;

  static ArmModel planar(std::vector<double> lengths);
  static ArmModel spatial(std::vector<double> lengths);
  /// Four-link spatial arm, lengths (0.2, 0.2, 0.2, 0.1) m, base at
  /// (0, -0.2, 0.15) facing +y.
  static ArmModel default_spatial();
};

VectorXd forward_kinematics(const ArmModel& arm, const VectorXd& q);
/// Positions for each row of q_seq.
MatrixXd forward_kinematics(const ArmModel& arm, const MatrixXd& q_seq);

/// Analytic positional Jacobian (position_dim x dof).
MatrixXd jacobian(const ArmModel& arm, const VectorXd& q);

/// Follows the target path with the damped right pseudo-inverse
///   q_{t+1} = q_t + J^T (J J^T + lambda I)^-1 (p*_{t+1} - p_t),
/// clamping joints to their limits. Row 0 of the result is q0; one row per
/// target.
MatrixXd track(const ArmModel& arm, const VectorXd& q0, const MatrixXd& targets,
               double damping = 1e-6);

/// Iterates the tracking update on a single target.
VectorXd inverse_kinematics(const ArmModel& arm, const VectorXd& target, const VectorXd& q_init,
                            int iterations = 200, double damping = 1e-4);

}  // namespace tpmove

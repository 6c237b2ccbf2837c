// Copyright 2026 The tpmove Authors
// SPDX-License-Identifier: Apache-2.0

#include "tpmove/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "tpmove/error.hpp"

namespace tpmove {
namespace {

Eigen::Vector3d joint_axis(const ArmModel& arm, Index i) {
  if (arm.variant == ArmVariant::Planar || i == 0) return Eigen::Vector3d::UnitZ();
  return Eigen::Vector3d::UnitY();
}

void check_q(const ArmModel& arm, const VectorXd& q) {
  if (q.size() != arm.dof()) {
    throw Error(ErrorCode::DimensionMismatch, "joint vector has " + std::to_string(q.size()) +
                                                  " entries for " + std::to_string(arm.dof()) +
                                                  " joints");
  }
}

// Joint origins (world), joint axes (world), and the tip position.
struct ChainPose {
  std::vector<Eigen::Vector3d> origins;
  std::vector<Eigen::Vector3d> axes;
  Eigen::Vector3d tip;
};

ChainPose chain_pose(const ArmModel& arm, const VectorXd& q) {
  ChainPose pose;
  Eigen::Isometry3d T = arm.base;
  for (Index i = 0; i < arm.dof(); ++i) {
    const Eigen::Vector3d axis = joint_axis(arm, i);
    pose.origins.push_back(T.translation());
    pose.axes.push_back(T.linear() * axis);
    T.rotate(Eigen::AngleAxisd(q(i), axis));
    T.translate(Eigen::Vector3d(arm.link_lengths[static_cast<std::size_t>(i)], 0.0, 0.0));
  }
  pose.tip = T.translation();
  return pose;
}

}  // namespace

double ArmModel::reach() const {
  return std::accumulate(link_lengths.begin(), link_lengths.end(), 0.0);
}

void ArmModel::validate() const {
  if (link_lengths.empty()) throw Error(ErrorCode::InvalidSpec, "arm has no links");
  for (double l : link_lengths) {
    if (!(l > 0.0)) throw Error(ErrorCode::InvalidSpec, "link lengths must be positive");
  }
  if (!joint_limits.empty()) {
    if (static_cast<Index>(joint_limits.size()) != dof()) {
      throw Error(ErrorCode::InvalidSpec, "one joint limit pair per joint is required");
    }
    for (const auto& [lo, hi] : joint_limits) {
      if (!(lo < hi)) throw Error(ErrorCode::InvalidSpec, "joint limit min must be below max");
    }
  }
  if (home.size() != 0 && home.size() != dof()) throw Error(ErrorCode::InvalidSpec, "home posture size");
}

bool ArmModel::within_limits(const VectorXd& q) const {
  if (joint_limits.empty()) return true;
  for (Index i = 0; i < q.size(); ++i) {
    const auto& [lo, hi] = joint_limits[static_cast<std::size_t>(i)];
    if (q(i) < lo || q(i) > hi) return false;
  }
  return true;
}

VectorXd ArmModel::clamp(const VectorXd& q) const {
  if (joint_limits.empty()) return q;
  VectorXd out = q;
  for (Index i = 0; i < q.size(); ++i) {
    const auto& [lo, hi] = joint_limits[static_cast<std::size_t>(i)];
    out(i) = std::clamp(q(i), lo, hi);
  }
  return out;
}

ArmModel ArmModel::planar(std::vector<double> lengths) {
  ArmModel arm;
  arm.link_lengths = std::move(lengths);
  arm.variant = ArmVariant::Planar;
  return arm;
}

ArmModel ArmModel::spatial(std::vector<double> lengths) {
  ArmModel arm;
  arm.link_lengths = std::move(lengths);
  arm.variant = ArmVariant::Spatial;
  return arm;
}

ArmModel ArmModel::default_spatial() {
  ArmModel arm = spatial({0.2, 0.2, 0.2, 0.1});
  arm.base.translation() = Eigen::Vector3d(0.0, -0.2, 0.15);
  constexpr double pi = std::numbers::pi;
  arm.joint_limits = {{-pi, pi}, {-2.6, 2.6}, {-2.6, 2.6}, {-2.6, 2.6}};
  arm.home = (VectorXd(4) << pi / 2, -0.3, 1.7, 1.0).finished();
  return arm;
}

VectorXd forward_kinematics(const ArmModel& arm, const VectorXd& q) {
  check_q(arm, q);
  const Eigen::Vector3d tip = chain_pose(arm, q).tip;
  return tip.head(arm.position_dim());
}

MatrixXd forward_kinematics(const ArmModel& arm, const MatrixXd& q_seq) {
  MatrixXd out(q_seq.rows(), arm.position_dim());
  for (Index t = 0; t < q_seq.rows(); ++t) {
    out.row(t) = forward_kinematics(arm, VectorXd(q_seq.row(t).transpose())).transpose();
  }
  return out;
}

MatrixXd jacobian(const ArmModel& arm, const VectorXd& q) {
  check_q(arm, q);
  const ChainPose pose = chain_pose(arm, q);
  MatrixXd J(arm.position_dim(), arm.dof());
  for (Index i = 0; i < arm.dof(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    const Eigen::Vector3d col = pose.axes[k].cross(pose.tip - pose.origins[k]);
    J.col(i) = col.head(arm.position_dim());
  }
  return J;
}

namespace {

// Near a singularity (smallest singular value below kSingularBand) the
// damping grows smoothly to kMaxDamping, which keeps the joint steps bounded
// when the target leaves the workspace.
constexpr double kSingularBand = 0.05;
constexpr double kMaxDamping = 1e-2;
// Cartesian error handed to one update is clamped to this length (m).
constexpr double kMaxError = 0.05;

VectorXd clamp_error(VectorXd dp) {
  const double n = dp.norm();
  if (n > kMaxError) dp *= kMaxError / n;
  return dp;
}

VectorXd pinv_step(const MatrixXd& J, const VectorXd& dp, double damping) {
  MatrixXd JJt = J * J.transpose();
  if (damping > 0.0) {
    const double s_min = std::sqrt(std::max(0.0, Eigen::SelfAdjointEigenSolver<MatrixXd>(JJt, Eigen::EigenvaluesOnly).eigenvalues()(0)));
    if (s_min < kSingularBand) {
      const double r = s_min / kSingularBand;
      damping += kMaxDamping * (1.0 - r * r);
    }
  }
  JJt.diagonal().array() += damping;
  if (damping == 0.0) {
    Eigen::FullPivLU<MatrixXd> lu(JJt);
    if (!lu.isInvertible()) throw Error(ErrorCode::SingularJacobian, "J J^T is singular");
    return J.transpose() * lu.solve(dp);
  }
  return J.transpose() * JJt.ldlt().solve(dp);
}

}  // namespace

MatrixXd track(const ArmModel& arm, const VectorXd& q0, const MatrixXd& targets, double damping) {
  check_q(arm, q0);
  if (targets.rows() == 0) throw Error(ErrorCode::EmptyData, "no targets to track");
  if (targets.cols() != arm.position_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "targets must have " +
                                                  std::to_string(arm.position_dim()) + " columns");
  }
  if (damping < 0.0) throw Error(ErrorCode::InvalidSpec, "damping must be non-negative");
  if (!arm.within_limits(q0)) throw Error(ErrorCode::InvalidSpec, "q0 violates the joint limits");

  MatrixXd q_seq(targets.rows(), arm.dof());
  VectorXd q = q0;
  q_seq.row(0) = q.transpose();
  for (Index t = 0; t + 1 < targets.rows(); ++t) {
    const ChainPose pose = chain_pose(arm, q);
    MatrixXd J(arm.position_dim(), arm.dof());
    for (Index i = 0; i < arm.dof(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      J.col(i) = pose.axes[k].cross(pose.tip - pose.origins[k]).head(arm.position_dim());
    }
    const VectorXd dp = targets.row(t + 1).transpose() - pose.tip.head(arm.position_dim());
    q = arm.clamp(q + pinv_step(J, clamp_error(dp), damping));
    q_seq.row(t + 1) = q.transpose();
  }
  return q_seq;
}

VectorXd inverse_kinematics(const ArmModel& arm, const VectorXd& target, const VectorXd& q_init,
                            int iterations, double damping) {
  check_q(arm, q_init);
  if (target.size() != arm.position_dim()) throw Error(ErrorCode::DimensionMismatch, "IK target size");
  VectorXd q = arm.clamp(q_init);
  for (int it = 0; it < iterations; ++it) {
    const VectorXd dp = target - forward_kinematics(arm, q);
    if (dp.norm() < 1e-12) break;
    q = arm.clamp(q + pinv_step(jacobian(arm, q), clamp_error(dp), damping));
  }
  return q;
}

}  // namespace tpmove

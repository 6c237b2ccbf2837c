// Copyright 2026 The tpmove Authors
// SPDX-License-Identifier: Apache-2.0

#include "tpmove/costs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tpmove/error.hpp"

namespace tpmove {
namespace {

double point_segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                              const Eigen::Vector2d& b) {
  const Eigen::Vector2d ab = b - a;
  const double s = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + s * ab)).norm();
}

void check_positions(const MatrixXd& p_seq) {
  if (p_seq.rows() == 0) throw Error(ErrorCode::EmptyData, "empty position sequence");
  if (p_seq.cols() != 3) throw Error(ErrorCode::DimensionMismatch, "obstacle cost needs 3-D positions");
}

}  // namespace

double cost_joint(const MatrixXd& q_seq, const MatrixXd& W) {
  if (q_seq.rows() < 2) return 0.0;
  const Index n = q_seq.cols();
  if (W.size() != 0 && (W.cols() != n)) {
    throw Error(ErrorCode::DimensionMismatch, "W must have one column per joint");
  }
  double total = 0.0;
  for (Index t = 0; t + 1 < q_seq.rows(); ++t) {
    const VectorXd dq = (q_seq.row(t + 1) - q_seq.row(t)).transpose();
    total += W.size() == 0 ? dq.norm() : (W * dq).norm();
  }
  return total;
}

// ---------------------------------------------------------------------------
// Obstacle geometry

void Obstacle::validate() const {
  const double tol = 1e-9;
  if (std::abs(axis_u.norm() - 1.0) > tol || std::abs(axis_v.norm() - 1.0) > tol ||
      std::abs(axis_u.dot(axis_v)) > tol) {
    throw Error(ErrorCode::DegenerateObstacle, "obstacle axes must be orthonormal");
  }
  if (!(half_u > 0.0) || !(half_v > 0.0)) {
    throw Error(ErrorCode::DegenerateObstacle, "obstacle half-extents must be positive");
  }
}

Eigen::Vector2d Obstacle::plane_coords(const Eigen::Vector3d& p) const {
  const Eigen::Vector3d r = p - center;
  return {r.dot(axis_u), r.dot(axis_v)};
}

bool Obstacle::contains(const Eigen::Vector2d& uv) const {
  return std::abs(uv(0)) < half_u && std::abs(uv(1)) < half_v;
}

double Obstacle::edge_distance(const Eigen::Vector2d& uv) const {
  const Eigen::Vector2d c00(-half_u, -half_v), c10(half_u, -half_v), c11(half_u, half_v),
      c01(-half_u, half_v);
  return std::min({point_segment_distance(uv, c00, c10), point_segment_distance(uv, c10, c11),
                   point_segment_distance(uv, c11, c01), point_segment_distance(uv, c01, c00)});
}

ObstacleHit obstacle_intersection(const MatrixXd& p_seq, const Obstacle& obstacle) {
  obstacle.validate();
  check_positions(p_seq);
  const Eigen::Vector3d n = obstacle.normal();
  const auto signed_dist = [&](Index t) {
    return n.dot(Eigen::Vector3d(p_seq.row(t).transpose()) - obstacle.center);
  };

  ObstacleHit hit;
  for (Index t = 0; t + 1 < p_seq.rows(); ++t) {
    const double s0 = signed_dist(t);
    const double s1 = signed_dist(t + 1);
    if ((s0 <= 0.0 && s1 >= 0.0) || (s0 >= 0.0 && s1 <= 0.0)) {
      const Eigen::Vector3d a = p_seq.row(t).transpose();
      const Eigen::Vector3d b = p_seq.row(t + 1).transpose();
      const double denom = s0 - s1;
      const double s = denom == 0.0 ? 0.0 : s0 / denom;
      hit.point = a + s * (b - a);
      hit.crossed = true;
      hit.segment = t;
      break;
    }
  }
  if (!hit.crossed) {
    Index best = 0;
    double best_abs = std::numeric_limits<double>::infinity();
    for (Index t = 0; t < p_seq.rows(); ++t) {
      const double s = std::abs(signed_dist(t));
      if (s < best_abs) {
        best_abs = s;
        best = t;
      }
    }
    const Eigen::Vector3d p = p_seq.row(best).transpose();
    hit.point = p - signed_dist(best) * n;
    hit.segment = best;
  }
  const Eigen::Vector2d uv = obstacle.plane_coords(hit.point);
  hit.inside = obstacle.contains(uv);
  hit.distance = obstacle.edge_distance(uv);
  return hit;
}

bool crosses_obstacle(const MatrixXd& p_seq, const Obstacle& obstacle) {
  obstacle.validate();
  check_positions(p_seq);
  const Eigen::Vector3d n = obstacle.normal();
  for (Index t = 0; t + 1 < p_seq.rows(); ++t) {
    const Eigen::Vector3d a = p_seq.row(t).transpose();
    const Eigen::Vector3d b = p_seq.row(t + 1).transpose();
    const double s0 = n.dot(a - obstacle.center);
    const double s1 = n.dot(b - obstacle.center);
    if ((s0 < 0.0 && s1 < 0.0) || (s0 > 0.0 && s1 > 0.0)) continue;
    if (s0 == 0.0 && s1 == 0.0) {
      // Segment lies in the plane: inside if either end or the midpoint is.
      for (const Eigen::Vector3d& p : {a, b, Eigen::Vector3d(0.5 * (a + b))}) {
        if (obstacle.contains(obstacle.plane_coords(p))) return true;
      }
      continue;
    }
    const Eigen::Vector3d p = a + (s0 / (s0 - s1)) * (b - a);
    if (obstacle.contains(obstacle.plane_coords(p))) return true;
  }
  return false;
}

double cost_obstacle(const MatrixXd& p_seq, const MatrixXd& q_seq, const Obstacle& obstacle,
                     const MatrixXd& W, const ObstacleConstants& k) {
  if (!(k.k1 > 0.0 && k.k2 > 0.0 && k.k3 > 0.0 && k.k4 > 0.0)) {
    throw Error(ErrorCode::InvalidSpec, "obstacle constants must be positive");
  }
  const ObstacleHit hit = obstacle_intersection(p_seq, obstacle);
  const double fq = cost_joint(q_seq, W);
  if (hit.inside) return fq + k.k1 * std::exp(k.k2 * hit.distance);
  return fq + k.k3 * std::exp(-k.k4 * hit.distance);
}

double cost_via_point(const MatrixXd& p_seq, const MatrixXd& q_seq, const MatrixXd& W,
                      const VectorXd& p_s, const VectorXd& p_e, Index idx_s, Index idx_e,
                      double k_p1, double k_p2) {
  const Index n = p_seq.rows();
  if (idx_s < 0 || idx_s >= n || idx_e < 0 || idx_e >= n) {
    throw Error(ErrorCode::IndexOutOfRange, "via-point index outside the trajectory of " +
                                                std::to_string(n) + " steps");
  }
  if (p_s.size() != p_seq.cols() || p_e.size() != p_seq.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "via-point targets do not match position size");
  }
  const double fq = cost_joint(q_seq, W);
  return fq + k_p1 * (p_seq.row(idx_s).transpose() - p_s).norm() +
         k_p2 * (p_seq.row(idx_e).transpose() - p_e).norm();
}

// ---------------------------------------------------------------------------

void CostSpec::validate() const {
  if (W.size() != 0 && W.rows() != W.cols()) throw Error(ErrorCode::InvalidSpec, "W must be square");
  switch (kind) {
    case CostKind::Joint:
      break;
    case CostKind::Obstacle:
      obstacle.validate();
      if (!(k.k1 > 0.0 && k.k2 > 0.0 && k.k3 > 0.0 && k.k4 > 0.0)) {
        throw Error(ErrorCode::InvalidSpec, "obstacle constants must be positive");
      }
      break;
    case CostKind::ViaPoint:
      if (!(k_p1 > 0.0 && k_p2 > 0.0)) throw Error(ErrorCode::InvalidSpec, "k_p1, k_p2 must be positive");
      if (p_s.size() == 0 || p_e.size() == 0) throw Error(ErrorCode::InvalidSpec, "via-point targets missing");
      break;
  }
}

Index time_to_index(double t, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidSpec, "time step must be positive");
  return static_cast<Index>(std::llround(t / dt));
}

double evaluate_cost(const CostSpec& spec, const MatrixXd& p_seq, const MatrixXd& q_seq,
                     double dt) {
  switch (spec.kind) {
    case CostKind::Joint:
      return cost_joint(q_seq, spec.W);
    case CostKind::Obstacle:
      return cost_obstacle(p_seq, q_seq, spec.obstacle, spec.W, spec.k);
    case CostKind::ViaPoint:
      return cost_via_point(p_seq, q_seq, spec.W, spec.p_s, spec.p_e, time_to_index(spec.t_s, dt),
                            time_to_index(spec.t_e, dt), spec.k_p1, spec.k_p2);
  }
  return 0.0;
}

}  // namespace tpmove

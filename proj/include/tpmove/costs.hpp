// Copyright 2026 The tpmove Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include "tpmove/gaussian.hpp"

namespace tpmove {

/// sum_t || W (q_{t+1} - q_t) ||. W may be empty (identity).
double cost_joint(const MatrixXd& q_seq, const MatrixXd& W = {});

/// Bounded planar rectangle: center + u * [-half_u, half_u] + v * [-half_v, half_v].
struct Obstacle {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d axis_u = Eigen::Vector3d::UnitX();
  Eigen::Vector3d axis_v = Eigen::Vector3d::UnitY();
  double half_u = 0.0;
  double half_v = 0.0;

  Eigen::Vector3d normal() const { return axis_u.cross(axis_v); }
  /// Throws DegenerateObstacle unless the axes are orthonormal (1e-9) and the
  /// half-extents positive.
  void validate() const;
  /// In-plane coordinates of the projection of p.
  Eigen::Vector2d plane_coords(const Eigen::Vector3d& p) const;
  bool contains(const Eigen::Vector2d& uv) const;
  /// Minimum in-plane distance to the four edges.
  double edge_distance(const Eigen::Vector2d& uv) const;
};

/// Where the path meets the obstacle plane.
struct ObstacleHit {
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  /// False when no segment crosses the plane and `point` is the
  /// closest-approach projection instead.
  bool crossed = false;
  bool inside = false;
  double distance = 0.0;
  Index segment = -1;
};

/// First plane crossing of the polyline (linear interpolation on the crossing
/// segment); falls back to the projection of the point closest to the plane.
ObstacleHit obstacle_intersection(const MatrixXd& p_seq, const Obstacle& obstacle);

/// True if any segment of the polyline passes through the rectangle interior.
bool crosses_obstacle(const MatrixXd& p_seq, const Obstacle& obstacle);

struct ObstacleConstants {
  double k1 = 5.0;
  double k2 = 2.0;
  double k3 = 1.0;
  double k4 = 10.0;
};

/// f_q + k1 exp(k2 d) inside the rectangle, f_q + k3 exp(-k4 d) outside.
double cost_obstacle(const MatrixXd& p_seq, const MatrixXd& q_seq, const Obstacle& obstacle,
                     const MatrixXd& W = {}, const ObstacleConstants& k = {});

/// f_q + k_p1 ||p[idx_s] - p_s|| + k_p2 ||p[idx_e] - p_e||.
double cost_via_point(const MatrixXd& p_seq, const MatrixXd& q_seq, const MatrixXd& W,
                      const VectorXd& p_s, const VectorXd& p_e, Index idx_s, Index idx_e,
                      double k_p1, double k_p2);

enum class CostKind { Joint, Obstacle, ViaPoint };

struct CostSpec {
  CostKind kind = CostKind::Joint;
  MatrixXd W;  // empty: identity
  Obstacle obstacle;
  ObstacleConstants k;
  VectorXd p_s;
  VectorXd p_e;
  double t_s = 0.0;  // seconds
  double t_e = 0.0;
  double k_p1 = 1.0;
  double k_p2 = 1.0;

  void validate() const;
};

/// Sample index closest to time t on a grid with spacing dt.
Index time_to_index(double t, double dt);

/// Evaluates a CostSpec on executed positions and joints sampled every dt.
double evaluate_cost(const CostSpec& spec, const MatrixXd& p_seq, const MatrixXd& q_seq,
                     double dt);

}  // namespace tpmove

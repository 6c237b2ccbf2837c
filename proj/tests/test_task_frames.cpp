// Copyright 2026 The tpmove Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "helpers.hpp"
#include "tpmove/error.hpp"
#include "tpmove/task_frames.hpp"

using namespace tpmove;
using namespace testing;

namespace {

const double kPi = std::numbers::pi;

// blockdiag(1, A_O) with a random rotation (scaled when `general`).
TaskFrame random_frame(std::mt19937_64& rng, Index dout = 3, bool general = false) {
  MatrixXd A = MatrixXd::Identity(dout + 1, dout + 1);
  MatrixXd R = random_rotation(rng, dout);
  if (general) R = R * (MatrixXd::Identity(dout, dout) + 0.3 * random_matrix(rng, dout, dout));
  A.bottomRightCorner(dout, dout) = R;
  VectorXd b = VectorXd::Zero(dout + 1);
  b.tail(dout) = random_vector(rng, dout);
  return {A, b};
}

LocalModel random_model(std::mt19937_64& rng, Index K, Index dout = 3) {
  std::vector<Gaussian> comps;
  for (Index k = 0; k < K; ++k) {
    Gaussian g = random_gaussian(rng, dout + 1);
    g.mean(0) = static_cast<double>(k) / static_cast<double>(std::max<Index>(K - 1, 1));
    comps.push_back(g);
  }
  std::uniform_real_distribution<double> u(0.2, 1.0);
  VectorXd w(K);
  for (Index k = 0; k < K; ++k) w(k) = u(rng);
  w /= w.sum();
  return {"m", GMM(w, comps), BlockSpec::time_input(dout)};
}

FrameAdjustment random_adjustment(std::mt19937_64& rng, Index dout = 3) {
  std::uniform_real_distribution<double> u(-kPi, kPi);
  FrameAdjustment a;
  a.angles = Eigen::Vector3d(u(rng), u(rng), u(rng));
  a.displacement = random_vector(rng, dout, 0.3);
  return a;
}

MatrixXd time_inputs(Index n) {
  MatrixXd t(n, 1);
  for (Index i = 0; i < n; ++i) t(i, 0) = static_cast<double>(i) / static_cast<double>(n - 1);
  return t;
}

Eigen::Matrix3d rx(double a) {
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return m;
}
Eigen::Matrix3d ry(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}
Eigen::Matrix3d rz(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}

double max_seq_diff(const std::vector<Gaussian>& a, const std::vector<Gaussian>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, max_abs(a[i].mean - b[i].mean));
    m = std::max(m, max_abs(a[i].covariance - b[i].covariance));
  }
  return m;
}

}  // namespace

TEST_CASE("projection round trip and simple frames") {
  std::mt19937_64 rng(1);
  Demonstration demo{random_matrix(rng, 30, 4), 0.1};
  CHECK(max_abs(project(demo, TaskFrame::identity(4)).points - demo.points) == 0.0);

  VectorXd start = demo.points.row(0).transpose();
  start(0) = 0.0;
  const Demonstration p = project(demo, TaskFrame::translation(start));
  CHECK(p.points.row(0).tail(3).norm() < 1e-15);

  for (int i = 0; i < 20; ++i) {
    const TaskFrame f = random_frame(rng, 3, true);
    const Demonstration back = unproject(project(demo, f), f);
    CHECK(max_abs(back.points - demo.points) < 1e-10);
  }
}

TEST_CASE("projection errors") {
  Demonstration demo{MatrixXd::Zero(3, 4), 0.1};
  MatrixXd A = MatrixXd::Identity(4, 4);
  A(2, 2) = 0.0;
  try {
    project(demo, TaskFrame(A, VectorXd::Zero(4)));
    FAIL("expected SingularRotation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularRotation);
  }
  try {
    project(demo, TaskFrame::identity(3));
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("rotation_from_angles") {
  CHECK(max_abs(rotation_from_angles(0, 0, 0) - Eigen::Matrix3d::Identity()) == 0.0);
  Eigen::Matrix3d half = Eigen::Vector3d(1, -1, -1).asDiagonal();
  CHECK(max_abs(rotation_from_angles(kPi, 0, 0) - half) < 1e-15);
  const Eigen::Matrix3d R = rotation_from_angles(0.1, 0.2, 0.3);
  CHECK(max_abs(R.transpose() * R - Eigen::Matrix3d::Identity()) < 1e-12);
  CHECK(R.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-4, 4);
  for (int i = 0; i < 50; ++i) {
    const double a = u(rng), b = u(rng), c = u(rng);
    CHECK(max_abs(rotation_from_angles(a, b, c) - rz(c) * ry(b) * rx(a)) < 1e-14);
  }
  CHECK(max_abs(planar_rotation(kPi / 2) - rz(kPi / 2).topLeftCorner(2, 2)) < 1e-15);
}

TEST_CASE("transform_conditional") {
  const Gaussian g(VectorXd::Zero(2), Eigen::Vector2d(1.0, 4.0).asDiagonal().toDenseMatrix());
  const BlockSpec spec = BlockSpec::time_input(2);
  MatrixXd A = MatrixXd::Identity(3, 3);
  A.bottomRightCorner(2, 2) = planar_rotation(kPi / 2);
  const Gaussian r = transform_conditional(g, TaskFrame(A, VectorXd::Zero(3)), spec);
  CHECK(max_abs(r.covariance - Eigen::Vector2d(4.0, 1.0).asDiagonal().toDenseMatrix()) < 1e-12);

  const Gaussian t = transform_conditional(g, TaskFrame::translation(Eigen::Vector3d(0, 1, 2)), spec);
  CHECK(max_abs(t.mean - Eigen::Vector2d(1, 2)) == 0.0);
  CHECK(max_abs(t.covariance - g.covariance) == 0.0);
}

TEST_CASE("adjust_frame follows A_O R, A_O d + b_O") {
  std::mt19937_64 rng(6);
  const BlockSpec spec = BlockSpec::time_input(3);
  for (int i = 0; i < 50; ++i) {
    const TaskFrame f = random_frame(rng);
    const FrameAdjustment adj = random_adjustment(rng);
    const TaskFrame g = adjust_frame(f, spec, adj);
    const Eigen::Matrix3d R = rz(adj.angles(2)) * ry(adj.angles(1)) * rx(adj.angles(0));
    const MatrixXd AO = f.A().bottomRightCorner(3, 3);
    CHECK(max_abs(g.A().bottomRightCorner(3, 3) - AO * R) < 1e-12);
    CHECK(max_abs(g.b().tail(3) - (AO * adj.displacement + f.b().tail(3))) < 1e-12);
    CHECK(g.A()(0, 0) == f.A()(0, 0));
    CHECK(g.b()(0) == f.b()(0));
    CHECK(max_abs(g.A().topRightCorner(1, 3)) == 0.0);
    const MatrixXd GO = g.A().bottomRightCorner(3, 3);
    CHECK(max_abs(GO * GO.transpose() - MatrixXd::Identity(3, 3)) < 1e-9);

    const TaskFrame z = adjust_frame(f, spec, FrameAdjustment::zero(3));
    CHECK(max_abs(z.A() - f.A()) == 0.0);
    CHECK(max_abs(z.b() - f.b()) == 0.0);
  }
  // Identity frame: the adjusted frame is exactly (R, d).
  const FrameAdjustment adj = random_adjustment(rng);
  const TaskFrame g = adjust_frame(TaskFrame::identity(4), spec, adj);
  CHECK(max_abs(g.A().bottomRightCorner(3, 3) - adjustment_rotation(adj, 3)) == 0.0);
  CHECK(max_abs(g.b().tail(3) - adj.displacement) == 0.0);
}

TEST_CASE("planar adjustment uses only gamma") {
  FrameAdjustment adj;
  adj.angles = Eigen::Vector3d(0.4, -0.2, 0.7);
  adj.displacement = Eigen::Vector2d(0.1, 0.2);
  CHECK(max_abs(adjustment_rotation(adj, 2) - planar_rotation(0.7)) == 0.0);
}

TEST_CASE("reproduction with one identity frame equals local GMR") {
  std::mt19937_64 rng(7);
  const LocalModel m = random_model(rng, 3);
  const MatrixXd in = time_inputs(20);
  const auto local = local_trajectory(m, in);
  const auto rep = reproduce(std::vector<LocalModel>{m}, std::vector<TaskFrame>{TaskFrame::identity(4)}, in);
  CHECK(max_seq_diff(local, rep) < 1e-12);
}

TEST_CASE("reproduction equals the precision-weighted product at each step") {
  std::mt19937_64 rng(8);
  std::vector<LocalModel> models{random_model(rng, 3), random_model(rng, 3)};
  std::vector<TaskFrame> frames{random_frame(rng), random_frame(rng)};
  const MatrixXd in = time_inputs(10);
  const auto rep = reproduce(models, frames, in);
  const BlockSpec spec = BlockSpec::time_input(3);
  for (Index t = 0; t < in.rows(); ++t) {
    MatrixXd L = MatrixXd::Zero(3, 3);
    VectorXd eta = VectorXd::Zero(3);
    for (std::size_t j = 0; j < 2; ++j) {
      const Gaussian c = gmr_condition(models[j].gmm, spec, in.row(t).transpose());
      const MatrixXd AO = frames[j].A().bottomRightCorner(3, 3);
      const VectorXd mu = AO * c.mean + frames[j].b().tail(3);
      const MatrixXd Li = (AO * c.covariance * AO.transpose()).inverse();
      L += Li;
      eta += Li * mu;
    }
    const VectorXd mean = L.inverse() * eta;
    CHECK(max_abs(rep[static_cast<std::size_t>(t)].mean - mean) < 1e-9);
  }
}

TEST_CASE("reproduction inputs pass through each frame's input block") {
  // A frame shifting local time by 0.5: its model is conditioned at t - 0.5.
  std::mt19937_64 rng(9);
  const LocalModel m = random_model(rng, 3);
  VectorXd b = VectorXd::Zero(4);
  b(0) = 0.5;
  const MatrixXd in = time_inputs(5);
  const auto rep = reproduce(std::vector<LocalModel>{m}, std::vector<TaskFrame>{TaskFrame(MatrixXd::Identity(4, 4), b)}, in);
  const auto local = local_trajectory(m, in.array() - 0.5);
  CHECK(max_seq_diff(local, rep) < 1e-12);
}

TEST_CASE("precomputed local trajectories fuse to the full reproduction") {
  std::mt19937_64 rng(10);
  std::vector<LocalModel> models{random_model(rng, 4), random_model(rng, 2), random_model(rng, 3)};
  std::vector<TaskFrame> frames{random_frame(rng), random_frame(rng), random_frame(rng)};
  const MatrixXd in = time_inputs(15);
  const auto local = local_trajectories(models, frames, in);
  const BlockSpec spec = BlockSpec::time_input(3);
  const std::vector<double> c{1.0, 0.3, 0.7};
  const Confidences conf = constant_confidences(c);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<TaskFrame> adjusted;
    for (const auto& f : frames) adjusted.push_back(adjust_frame(f, spec, random_adjustment(rng)));
    CHECK(max_seq_diff(fuse_local_trajectories(local, adjusted, spec), reproduce(models, adjusted, in)) == 0.0);
    CHECK(max_seq_diff(fuse_local_trajectories(local, adjusted, spec, conf), reproduce(models, adjusted, in, conf)) == 0.0);
  }
}

TEST_CASE("duality: adjusted frames equal dual-transformed models") {
  std::mt19937_64 rng(11);
  const BlockSpec spec = BlockSpec::time_input(3);
  const MatrixXd in = time_inputs(12);
  for (int trial = 0; trial < 40; ++trial) {
    const Index P = 1 + trial % 3;
    std::vector<LocalModel> models;
    std::vector<TaskFrame> frames, adjusted;
    for (Index j = 0; j < P; ++j) {
      models.push_back(random_model(rng, 1 + trial % 4));
      frames.push_back(random_frame(rng, 3, trial % 2 == 1));
      adjusted.push_back(adjust_frame(frames.back(), spec, random_adjustment(rng)));
    }
    std::vector<LocalModel> dual;
    for (Index j = 0; j < P; ++j) {
      const auto k = static_cast<std::size_t>(j);
      dual.push_back(dual_model_transform(models[k], frames[k], adjusted[k]));
    }
    CHECK(max_seq_diff(reproduce(models, adjusted, in), reproduce(dual, frames, in)) < 1e-9);

    // Component-level form as well.
    for (std::size_t j = 0; j < models.size(); ++j) {
      const GMM a = transform_model(models[j], adjusted[j]);
      const GMM b = transform_model(dual[j], frames[j]);
      for (Index k = 0; k < a.size(); ++k) {
        const auto kk = static_cast<std::size_t>(k);
        CHECK(max_abs(a.components[kk].mean - b.components[kk].mean) < 1e-9);
        CHECK(max_abs(a.components[kk].covariance - b.components[kk].covariance) < 1e-9);
      }
    }
  }
}

TEST_CASE("dual transform special cases") {
  std::mt19937_64 rng(12);
  const BlockSpec spec = BlockSpec::time_input(3);
  const LocalModel m = random_model(rng, 3);
  const TaskFrame f = random_frame(rng);
  const LocalModel same = dual_model_transform(m, f, f);
  for (Index k = 0; k < 3; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    CHECK(max_abs(same.gmm.components[kk].mean - m.gmm.components[kk].mean) < 1e-12);
    CHECK(max_abs(same.gmm.components[kk].covariance - m.gmm.components[kk].covariance) < 1e-12);
  }
  const FrameAdjustment adj = random_adjustment(rng);
  const TaskFrame id = TaskFrame::identity(4);
  const TaskFrame g = adjust_frame(id, spec, adj);
  const LocalModel pushed = dual_model_transform(m, id, g);
  const MatrixXd R = g.A().bottomRightCorner(3, 3);
  for (Index k = 0; k < 3; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    const VectorXd mu = m.gmm.components[kk].mean;
    CHECK(max_abs(pushed.gmm.components[kk].mean.tail(3) - (R * mu.tail(3) + g.b().tail(3))) < 1e-12);
    CHECK(pushed.gmm.components[kk].mean(0) == mu(0));
  }
}

TEST_CASE("global rigid motion of all frames moves the reproduction") {
  std::mt19937_64 rng(13);
  std::vector<LocalModel> models{random_model(rng, 3), random_model(rng, 3)};
  std::vector<TaskFrame> frames{random_frame(rng), random_frame(rng)};
  const MatrixXd in = time_inputs(10);
  const auto base = reproduce(models, frames, in);
  const MatrixXd Q = random_rotation(rng, 3);
  const VectorXd s = random_vector(rng, 3);
  std::vector<TaskFrame> moved;
  for (const auto& f : frames) {
    MatrixXd A = f.A();
    VectorXd b = f.b();
    A.bottomRightCorner(3, 3) = Q * A.bottomRightCorner(3, 3);
    b.tail(3) = Q * b.tail(3) + s;
    moved.emplace_back(A, b);
  }
  const auto rep = reproduce(models, moved, in);
  for (std::size_t t = 0; t < rep.size(); ++t) {
    CHECK(max_abs(rep[t].mean - (Q * base[t].mean + s)) < 1e-9);
    CHECK(max_abs(rep[t].covariance - Q * base[t].covariance * Q.transpose()) < 1e-9);
  }
}

TEST_CASE("confidences") {
  std::mt19937_64 rng(14);
  std::vector<LocalModel> models{random_model(rng, 3), random_model(rng, 3)};
  std::vector<TaskFrame> frames{random_frame(rng), random_frame(rng)};
  const MatrixXd in = time_inputs(8);
  const std::vector<double> ones{1.0, 1.0};
  CHECK(max_seq_diff(reproduce(models, frames, in, constant_confidences(ones)), reproduce(models, frames, in)) <= 1e-12);

  // Approaches the frame-1-only reproduction as c2 -> 0.
  const auto only1 = reproduce(std::vector<LocalModel>{models[0]}, std::vector<TaskFrame>{frames[0]}, in);
  double prev = 1e300;
  for (double c2 : {0.5, 1e-2, 1e-4, 1e-6}) {
    const std::vector<double> c{1.0, c2};
    const auto r = reproduce(models, frames, in, constant_confidences(c));
    double d = 0.0;
    for (std::size_t t = 0; t < r.size(); ++t) d = std::max(d, (r[t].mean - only1[t].mean).norm());
    CHECK(d < prev);
    prev = d;
  }
  CHECK(prev < 1e-4);

  // Per-step confidences: a row per step.
  MatrixXd per_step(in.rows(), 2);
  per_step.col(0).setOnes();
  per_step.col(1).setConstant(0.5);
  const std::vector<double> half{1.0, 0.5};
  CHECK(max_seq_diff(reproduce(models, frames, in, per_step), reproduce(models, frames, in, constant_confidences(half))) == 0.0);
}

TEST_CASE("confidence moves the fused mean toward the favored frame") {
  // Equal covariances after transformation: identical models, translated frames.
  std::mt19937_64 rng(15);
  const LocalModel m = random_model(rng, 2);
  std::vector<LocalModel> models{m, m};
  std::vector<TaskFrame> frames{TaskFrame::translation(Eigen::Vector4d(0, 0, 0, 0)),
                                TaskFrame::translation(Eigen::Vector4d(0, 1, 0.5, 0))};
  const MatrixXd in = time_inputs(4);
  const auto target = local_trajectory(m, in);
  double prev = 1e300;
  for (double c2 : {0.1, 0.3, 0.6, 1.0}) {
    const std::vector<double> c{0.5, c2};
    const auto r = reproduce(models, frames, in, constant_confidences(c));
    const double d = (r[2].mean - (target[2].mean + Eigen::Vector3d(1, 0.5, 0))).norm();
    CHECK(d < prev);
    prev = d;
  }
}

TEST_CASE("time-indexed frames") {
  std::mt19937_64 rng(16);
  const BlockSpec spec = BlockSpec::time_input(3);
  std::vector<LocalModel> models{random_model(rng, 3)};
  const TaskFrame f = random_frame(rng);
  const MatrixXd in = time_inputs(6);
  std::vector<MatrixXd> As(6, f.A());
  std::vector<VectorXd> bs(6, f.b());
  const TaskFrame series(As, bs);
  CHECK(max_seq_diff(reproduce(models, std::vector<TaskFrame>{series}, in),
                     reproduce(models, std::vector<TaskFrame>{f}, in)) == 0.0);

  std::vector<FrameAdjustment> adjs;
  for (int t = 0; t < 6; ++t) adjs.push_back(random_adjustment(rng));
  const TaskFrame adjusted = adjust_frame_series(f, spec, adjs);
  CHECK(adjusted.steps() == 6);
  for (Index t = 0; t < 6; ++t) {
    const TaskFrame one = adjust_frame(f, spec, adjs[static_cast<std::size_t>(t)]);
    CHECK(max_abs(adjusted.A(t) - one.A()) == 0.0);
    CHECK(max_abs(adjusted.b(t) - one.b()) == 0.0);
  }
}

TEST_CASE("block-diagonal check and frame count errors") {
  MatrixXd A = MatrixXd::Identity(4, 4);
  A(0, 2) = 0.1;
  const TaskFrame f(A, VectorXd::Zero(4));
  CHECK_THROWS_AS(f.check_block_diagonal(BlockSpec::time_input(3)), Error);
  std::mt19937_64 rng(17);
  std::vector<LocalModel> models{random_model(rng, 2)};
  std::vector<TaskFrame> frames{TaskFrame::identity(4), TaskFrame::identity(4)};
  try {
    reproduce(models, frames, time_inputs(3));
    FAIL("expected FrameCountMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FrameCountMismatch);
  }
}

TEST_CASE("fit_local_models") {
  std::mt19937_64 rng(18);
  std::vector<Demonstration> demos;
  for (int m = 0; m < 4; ++m) {
    MatrixXd pts(40, 4);
    for (Index i = 0; i < 40; ++i) {
      const double t = i / 39.0;
      pts.row(i) << t, t + 0.01 * m, std::sin(3 * t), 0.1 * m * t;
    }
    demos.push_back({pts, 1.0 / 39.0});
  }
  const BlockSpec spec = BlockSpec::time_input(3);
  std::vector<TaskFrame> frames{TaskFrame::identity(4), random_frame(rng)};
  EmOptions em;
  em.init = TimeBinsInit{};
  const auto models = fit_local_models(demos, frames, 4, spec, em);
  REQUIRE(models.size() == 2);
  CHECK(models[0].gmm.size() == 4);

  MatrixXd all(160, 4);
  for (int m = 0; m < 4; ++m) all.middleRows(40 * m, 40) = demos[static_cast<std::size_t>(m)].points;
  const GMM direct = em_fit(all, 4, em);
  for (Index k = 0; k < 4; ++k) {
    CHECK(max_abs(models[0].gmm.components[static_cast<std::size_t>(k)].mean -
                  direct.components[static_cast<std::size_t>(k)].mean) < 1e-12);
  }
  CHECK(fit_local_models(demos, std::vector<TaskFrame>{}, 4, spec, em).empty());
}

// Copyright 2026 The tpmove Authors
// SPDX-License-Identifier: Apache-2.0

#include "tpmove/task_frames.hpp"

#include <cmath>
#include <string>

#include "tpmove/error.hpp"

namespace tpmove {
namespace {

Eigen::FullPivLU<MatrixXd> invertible_lu(const MatrixXd& A, const char* what) {
  Eigen::FullPivLU<MatrixXd> lu(A);
  if (!lu.isInvertible()) throw Error(ErrorCode::SingularRotation, std::string(what) + " is singular");
  return lu;
}

std::string default_id(std::size_t j, std::span<const std::string> ids) {
  if (j < ids.size()) return ids[j];
  return "frame" + std::to_string(j + 1);
}

bool nearly_equal(const MatrixXd& a, const MatrixXd& b, double tol) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.size() == 0 || (a - b).cwiseAbs().maxCoeff() <= tol);
}

}  // namespace

// ---------------------------------------------------------------------------
// TaskFrame

TaskFrame::TaskFrame(MatrixXd A, VectorXd b) {
  if (A.rows() != b.size() || A.cols() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch, "frame rotation must be D x D for a D-vector b");
  }
  A_.push_back(std::move(A));
  b_.push_back(std::move(b));
}

TaskFrame::TaskFrame(std::vector<MatrixXd> A_t, std::vector<VectorXd> b_t)
    : A_(std::move(A_t)), b_(std::move(b_t)) {
  if (A_.empty() || A_.size() != b_.size()) {
    throw Error(ErrorCode::LengthMismatch, "time-indexed frame needs one (A, b) per step");
  }
  const Index d = b_.front().size();
  for (std::size_t t = 0; t < A_.size(); ++t) {
    if (A_[t].rows() != d || A_[t].cols() != d || b_[t].size() != d) {
      throw Error(ErrorCode::DimensionMismatch, "step " + std::to_string(t) + " has wrong shape");
    }
  }
}

TaskFrame TaskFrame::identity(Index dim) {
  return {MatrixXd::Identity(dim, dim), VectorXd::Zero(dim)};
}

TaskFrame TaskFrame::translation(VectorXd b) {
  const Index d = b.size();
  return {MatrixXd::Identity(d, d), std::move(b)};
}

const MatrixXd& TaskFrame::A(Index t) const {
  if (is_static()) return A_.front();
  if (t < 0 || t >= steps()) throw Error(ErrorCode::IndexOutOfRange, "frame step " + std::to_string(t));
  return A_[static_cast<std::size_t>(t)];
}

const VectorXd& TaskFrame::b(Index t) const {
  if (is_static()) return b_.front();
  if (t < 0 || t >= steps()) throw Error(ErrorCode::IndexOutOfRange, "frame step " + std::to_string(t));
  return b_[static_cast<std::size_t>(t)];
}

MatrixXd TaskFrame::A_in(const BlockSpec& spec, Index t) const {
  return A(t)(spec.input_dims, spec.input_dims);
}
MatrixXd TaskFrame::A_out(const BlockSpec& spec, Index t) const {
  return A(t)(spec.output_dims, spec.output_dims);
}
VectorXd TaskFrame::b_in(const BlockSpec& spec, Index t) const { return b(t)(spec.input_dims); }
VectorXd TaskFrame::b_out(const BlockSpec& spec, Index t) const { return b(t)(spec.output_dims); }

void TaskFrame::check_block_diagonal(const BlockSpec& spec) const {
  if (spec.dim() != dim()) {
    throw Error(ErrorCode::DimensionMismatch, "frame dimension " + std::to_string(dim()) +
                                                  " does not match block spec");
  }
  for (const auto& A : A_) {
    const MatrixXd io = A(spec.input_dims, spec.output_dims);
    const MatrixXd oi = A(spec.output_dims, spec.input_dims);
    if ((io.size() > 0 && io.cwiseAbs().maxCoeff() != 0.0) ||
        (oi.size() > 0 && oi.cwiseAbs().maxCoeff() != 0.0)) {
      throw Error(ErrorCode::DimensionMismatch, "frame rotation is not block diagonal");
    }
  }
}

FrameAdjustment FrameAdjustment::zero(Index output_dim) {
  FrameAdjustment a;
  a.displacement = VectorXd::Zero(output_dim);
  return a;
}

// ---------------------------------------------------------------------------
// Projection

Demonstration project(const Demonstration& demo, const TaskFrame& frame) {
  if (demo.dim() != frame.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "demonstration and frame dimensions differ");
  }
  if (!frame.is_static() && frame.steps() != demo.steps()) {
    throw Error(ErrorCode::LengthMismatch, "time-indexed frame length differs from demonstration");
  }
  Demonstration out{MatrixXd(demo.points.rows(), demo.points.cols()), demo.dt};
  if (frame.is_static()) {
    const auto lu = invertible_lu(frame.A(), "frame rotation");
    const MatrixXd centered = (demo.points.rowwise() - frame.b().transpose()).transpose();
    out.points = lu.solve(centered).transpose();
    return out;
  }
  for (Index t = 0; t < demo.steps(); ++t) {
    const auto lu = invertible_lu(frame.A(t), "frame rotation");
    out.points.row(t) = lu.solve(VectorXd(demo.points.row(t).transpose() - frame.b(t))).transpose();
  }
  return out;
}

Demonstration unproject(const Demonstration& demo, const TaskFrame& frame) {
  if (demo.dim() != frame.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "demonstration and frame dimensions differ");
  }
  Demonstration out{MatrixXd(demo.points.rows(), demo.points.cols()), demo.dt};
  for (Index t = 0; t < demo.steps(); ++t) {
    const Index s = frame.is_static() ? 0 : t;
    out.points.row(t) = (frame.A(s) * demo.points.row(t).transpose() + frame.b(s)).transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Local models

std::vector<LocalModel> fit_local_models(std::span<const Demonstration> demos,
                                         const std::vector<std::vector<TaskFrame>>& frames,
                                         Index K, const BlockSpec& spec, const EmOptions& em,
                                         std::span<const std::string> frame_ids) {
  if (demos.empty()) throw Error(ErrorCode::EmptyData, "no demonstrations");
  const Index d = demos.front().dim();
  Index rows = 0;
  for (const auto& demo : demos) {
    if (demo.dim() != d) throw Error(ErrorCode::DimensionMismatch, "demonstrations differ in dimension");
    rows += demo.steps();
  }
  if (spec.dim() != d) throw Error(ErrorCode::DimensionMismatch, "block spec does not match data");

  std::vector<LocalModel> models;
  for (std::size_t j = 0; j < frames.size(); ++j) {
    if (frames[j].size() != demos.size()) {
      throw Error(ErrorCode::FrameCountMismatch,
                  "frame " + std::to_string(j) + " needs one instance per demonstration");
    }
    MatrixXd data(rows, d);
    Index row = 0;
    for (std::size_t m = 0; m < demos.size(); ++m) {
      const Demonstration local = project(demos[m], frames[j][m]);
      data.middleRows(row, local.steps()) = local.points;
      row += local.steps();
    }
    models.push_back({default_id(j, frame_ids), em_fit(data, K, em), spec});
  }
  return models;
}

std::vector<LocalModel> fit_local_models(std::span<const Demonstration> demos,
                                         std::span<const TaskFrame> frames, Index K,
                                         const BlockSpec& spec, const EmOptions& em,
                                         std::span<const std::string> frame_ids) {
  std::vector<std::vector<TaskFrame>> per_demo;
  for (const auto& f : frames) per_demo.emplace_back(demos.size(), f);
  if (frames.empty()) {
    if (demos.empty()) throw Error(ErrorCode::EmptyData, "no demonstrations");
    return {};
  }
  return fit_local_models(demos, per_demo, K, spec, em, frame_ids);
}

std::vector<Gaussian> local_trajectory(const LocalModel& model, const MatrixXd& inputs) {
  const GmrConditioner gmr(model.gmm, model.spec);
  std::vector<Gaussian> out;
  out.reserve(static_cast<std::size_t>(inputs.rows()));
  for (Index t = 0; t < inputs.rows(); ++t) out.push_back(gmr.condition(inputs.row(t).transpose()));
  return out;
}

Gaussian transform_conditional(const Gaussian& g, const TaskFrame& frame, const BlockSpec& spec,
                               Index t) {
  if (g.dim() != spec.output_size() || frame.dim() != spec.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "conditional does not match the frame output block");
  }
  const MatrixXd Ao = frame.A_out(spec, t);
  return {Ao * g.mean + frame.b_out(spec, t), symmetrize(Ao * g.covariance * Ao.transpose())};
}

// ---------------------------------------------------------------------------
// Reproduction

Confidences constant_confidences(std::span<const double> per_frame) {
  Confidences c(1, static_cast<Index>(per_frame.size()));
  for (std::size_t j = 0; j < per_frame.size(); ++j) c(0, static_cast<Index>(j)) = per_frame[j];
  return c;
}

std::vector<std::vector<Gaussian>> local_trajectories(std::span<const LocalModel> models,
                                                      std::span<const TaskFrame> frames,
                                                      const MatrixXd& inputs) {
  if (models.size() != frames.size() || models.empty()) {
    throw Error(ErrorCode::FrameCountMismatch, std::to_string(models.size()) + " models for " +
                                                   std::to_string(frames.size()) + " frames");
  }
  if (inputs.rows() == 0) throw Error(ErrorCode::EmptyData, "no inputs to reproduce");
  std::vector<std::vector<Gaussian>> local;
  for (std::size_t j = 0; j < models.size(); ++j) {
    const BlockSpec& spec = models[j].spec;
    const TaskFrame& frame = frames[j];
    frame.check_block_diagonal(spec);
    if (inputs.cols() != spec.input_size()) {
      throw Error(ErrorCode::DimensionMismatch, "inputs do not match the input block");
    }
    if (!frame.is_static() && frame.steps() != inputs.rows()) {
      throw Error(ErrorCode::LengthMismatch, "time-indexed frame length differs from inputs");
    }
    const GmrConditioner gmr(models[j].gmm, spec);
    std::vector<Gaussian> seq;
    seq.reserve(static_cast<std::size_t>(inputs.rows()));
    if (frame.is_static()) {
      const auto lu = invertible_lu(frame.A_in(spec), "frame input block");
      const MatrixXd local_in = lu.solve((inputs.rowwise() - frame.b_in(spec).transpose()).transpose());
      for (Index t = 0; t < inputs.rows(); ++t) seq.push_back(gmr.condition(local_in.col(t)));
    } else {
      for (Index t = 0; t < inputs.rows(); ++t) {
        const auto lu = invertible_lu(frame.A_in(spec, t), "frame input block");
        seq.push_back(gmr.condition(lu.solve(VectorXd(inputs.row(t).transpose() - frame.b_in(spec, t)))));
      }
    }
    local.push_back(std::move(seq));
  }
  return local;
}

std::vector<Gaussian> fuse_local_trajectories(const std::vector<std::vector<Gaussian>>& local,
                                              std::span<const TaskFrame> frames,
                                              const BlockSpec& spec,
                                              const std::optional<Confidences>& confidences) {
  const std::size_t P = frames.size();
  if (local.size() != P || P == 0) {
    throw Error(ErrorCode::FrameCountMismatch, "one local trajectory per frame is required");
  }
  const std::size_t N = local.front().size();
  for (const auto& seq : local) {
    if (seq.size() != N) throw Error(ErrorCode::LengthMismatch, "local trajectories differ in length");
  }
  if (confidences) {
    if (confidences->cols() != static_cast<Index>(P)) {
      throw Error(ErrorCode::FrameCountMismatch, "confidence columns must match frame count");
    }
    if (confidences->rows() != 1 && confidences->rows() != static_cast<Index>(N)) {
      throw Error(ErrorCode::LengthMismatch, "confidences need 1 or N rows");
    }
  }
  for (const auto& f : frames) {
    if (!f.is_static() && f.steps() != static_cast<Index>(N)) {
      throw Error(ErrorCode::LengthMismatch, "time-indexed frame length differs from inputs");
    }
  }

  std::vector<Gaussian> out;
  out.reserve(N);
  std::vector<Gaussian> factors(P);
  std::vector<double> c(P);
  for (std::size_t t = 0; t < N; ++t) {
    for (std::size_t j = 0; j < P; ++j) {
      const Index step = frames[j].is_static() ? 0 : static_cast<Index>(t);
      factors[j] = transform_conditional(local[j][t], frames[j], spec, step);
    }
    if (confidences) {
      const Index row = confidences->rows() == 1 ? 0 : static_cast<Index>(t);
      for (std::size_t j = 0; j < P; ++j) c[j] = (*confidences)(row, static_cast<Index>(j));
      out.push_back(weighted_gaussian_product(factors, c));
    } else {
      out.push_back(gaussian_product(factors));
    }
  }
  return out;
}

std::vector<Gaussian> reproduce(std::span<const LocalModel> models,
                                std::span<const TaskFrame> frames, const MatrixXd& inputs,
                                const std::optional<Confidences>& confidences) {
  const auto local = local_trajectories(models, frames, inputs);
  return fuse_local_trajectories(local, frames, models.front().spec, confidences);
}

MatrixXd mean_trajectory(std::span<const Gaussian> seq) {
  if (seq.empty()) return {};
  MatrixXd out(static_cast<Index>(seq.size()), seq.front().dim());
  for (std::size_t t = 0; t < seq.size(); ++t) out.row(static_cast<Index>(t)) = seq[t].mean.transpose();
  return out;
}

// ---------------------------------------------------------------------------
// Frame adjustment

Eigen::Matrix3d rotation_from_angles(double alpha, double beta, double gamma) {
  const Eigen::Matrix3d rx = Eigen::AngleAxisd(alpha, Eigen::Vector3d::UnitX()).toRotationMatrix();
  const Eigen::Matrix3d ry = Eigen::AngleAxisd(beta, Eigen::Vector3d::UnitY()).toRotationMatrix();
  const Eigen::Matrix3d rz = Eigen::AngleAxisd(gamma, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  return rz * ry * rx;
}

Eigen::Matrix2d planar_rotation(double gamma) {
  return Eigen::Rotation2Dd(gamma).toRotationMatrix();
}

MatrixXd adjustment_rotation(const FrameAdjustment& adj, Index output_dim) {
  if (output_dim == 3) return rotation_from_angles(adj.angles(0), adj.angles(1), adj.angles(2));
  if (output_dim == 2) return planar_rotation(adj.angles(2));
  throw Error(ErrorCode::DimensionMismatch,
              "frame adjustment needs a 2-D or 3-D output block, got " + std::to_string(output_dim));
}

namespace {

void adjust_step(MatrixXd& A, VectorXd& b, const BlockSpec& spec, const FrameAdjustment& adj) {
  const Index dout = spec.output_size();
  if (adj.displacement.size() != dout) {
    throw Error(ErrorCode::DimensionMismatch, "displacement must cover the output block");
  }
  const MatrixXd R = adjustment_rotation(adj, dout);
  const MatrixXd Ao = A(spec.output_dims, spec.output_dims);
  const VectorXd bo = b(spec.output_dims);
  A(spec.output_dims, spec.output_dims) = Ao * R;
  b(spec.output_dims) = Ao * adj.displacement + bo;
}

}  // namespace

TaskFrame adjust_frame(const TaskFrame& frame, const BlockSpec& spec, const FrameAdjustment& adj,
                       Index t) {
  frame.check_block_diagonal(spec);
  if (frame.is_static()) {
    MatrixXd A = frame.A();
    VectorXd b = frame.b();
    adjust_step(A, b, spec, adj);
    return {std::move(A), std::move(b)};
  }
  std::vector<MatrixXd> As;
  std::vector<VectorXd> bs;
  for (Index s = 0; s < frame.steps(); ++s) {
    As.push_back(frame.A(s));
    bs.push_back(frame.b(s));
  }
  if (t < 0 || t >= frame.steps()) throw Error(ErrorCode::IndexOutOfRange, "frame step " + std::to_string(t));
  adjust_step(As[static_cast<std::size_t>(t)], bs[static_cast<std::size_t>(t)], spec, adj);
  return {std::move(As), std::move(bs)};
}

TaskFrame adjust_frame_series(const TaskFrame& frame, const BlockSpec& spec,
                              std::span<const FrameAdjustment> adjustments) {
  if (adjustments.empty()) throw Error(ErrorCode::LengthMismatch, "no adjustments");
  if (adjustments.size() == 1 && frame.is_static()) return adjust_frame(frame, spec, adjustments[0]);
  frame.check_block_diagonal(spec);
  const auto n = static_cast<Index>(adjustments.size());
  if (!frame.is_static() && n != 1 && n != frame.steps()) {
    throw Error(ErrorCode::LengthMismatch, "adjustment count differs from frame length");
  }
  const Index steps = std::max(n, frame.steps());
  std::vector<MatrixXd> As;
  std::vector<VectorXd> bs;
  for (Index s = 0; s < steps; ++s) {
    MatrixXd A = frame.A(frame.is_static() ? 0 : s);
    VectorXd b = frame.b(frame.is_static() ? 0 : s);
    adjust_step(A, b, spec, adjustments[static_cast<std::size_t>(n == 1 ? 0 : s)]);
    As.push_back(std::move(A));
    bs.push_back(std::move(b));
  }
  return {std::move(As), std::move(bs)};
}

// ---------------------------------------------------------------------------
// Dual view

LocalModel dual_model_transform(const LocalModel& model, const TaskFrame& frame,
                                const TaskFrame& adjusted, Index t) {
  const BlockSpec& spec = model.spec;
  if (frame.dim() != spec.dim() || adjusted.dim() != spec.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "frames do not match the model dimension");
  }
  if (!nearly_equal(frame.A_in(spec, t), adjusted.A_in(spec, t), 1e-12) ||
      !nearly_equal(frame.b_in(spec, t), adjusted.b_in(spec, t), 1e-12)) {
    throw Error(ErrorCode::InvalidSpec, "frames must share their input blocks");
  }
  const auto lu = invertible_lu(frame.A_out(spec, t), "frame output block");
  const MatrixXd M = lu.solve(adjusted.A_out(spec, t));
  const VectorXd shift = lu.solve(VectorXd(adjusted.b_out(spec, t) - frame.b_out(spec, t)));
  const auto& in = spec.input_dims;
  const auto& out = spec.output_dims;

  LocalModel result = model;
  for (auto& c : result.gmm.components) {
    VectorXd mu = c.mean;
    mu(out) = M * c.mean(out) + shift;
    MatrixXd S = c.covariance;
    const MatrixXd s_oi = M * c.covariance(out, in);
    S(out, in) = s_oi;
    S(in, out) = s_oi.transpose();
    S(out, out) = symmetrize(M * c.covariance(out, out) * M.transpose());
    c = Gaussian(std::move(mu), std::move(S));
  }
  return result;
}

GMM transform_model(const LocalModel& model, const TaskFrame& frame, Index t) {
  if (frame.dim() != model.gmm.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "frame does not match the model dimension");
  }
  const MatrixXd& A = frame.A(t);
  std::vector<Gaussian> comps;
  for (const auto& c : model.gmm.components) {
    comps.emplace_back(A * c.mean + frame.b(t), symmetrize(A * c.covariance * A.transpose()));
  }
  return {model.gmm.weights, std::move(comps)};
}

GMM global_components(std::span<const LocalModel> models, std::span<const TaskFrame> frames,
                      Index t) {
  if (models.size() != frames.size() || models.empty()) {
    throw Error(ErrorCode::FrameCountMismatch, "one frame per model is required");
  }
  const Index K = models.front().gmm.size();
  std::vector<GMM> mapped;
  VectorXd w = VectorXd::Zero(K);
  for (std::size_t j = 0; j < models.size(); ++j) {
    if (models[j].gmm.size() != K) throw Error(ErrorCode::DimensionMismatch, "models differ in K");
    mapped.push_back(transform_model(models[j], frames[j], t));
    w += models[j].gmm.weights;
  }
  std::vector<Gaussian> comps;
  for (Index k = 0; k < K; ++k) {
    std::vector<Gaussian> factors;
    for (const auto& g : mapped) factors.push_back(g.components[static_cast<std::size_t>(k)]);
    comps.push_back(gaussian_product(factors));
  }
  return {w / w.sum(), std::move(comps)};
}

}  // namespace tpmove

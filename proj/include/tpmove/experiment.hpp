// Copyright 2026 The tpmove Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tpmove/demos.hpp"
#include "tpmove/policy.hpp"
#include "tpmove/selection.hpp"

namespace tpmove {

using nlohmann::json;

/// How a frame is placed on each training demonstration.
enum class TrainPlacement {
  Fixed,     // same (A, b) for every demo
  Keypoint,  // translated to the demo's position at `keypoint_time`
  Decoy,     // random origin at distance `decoy_distance` from the demo start
};

struct FrameConfig {
  std::string id;
  /// Frame in the reproduction situation.
  TaskFrame frame;
  TrainPlacement placement = TrainPlacement::Fixed;
  TaskFrame train_frame;
  double keypoint_time = 0.0;
  double decoy_distance = 0.0;
  /// Reuse another frame's local model instead of training one.
  std::string model_of;
};

struct NamedAdjustments {
  std::string name;
  std::vector<FrameAdjustment> adjustments;  // one per frame, in frame order
};

struct SelectionConfig {
  std::vector<std::string> candidates;
  Index max_frames = 2;
  Index runs_per_eval = 1;
};

struct ExperimentConfig {
  std::filesystem::path base_dir;
  std::uint64_t seed = 0;

  std::optional<std::filesystem::path> demo_path;
  DemoSpec demo_spec;
  double keypoint_jitter = 0.0;

  BlockSpec spec = BlockSpec::time_input(3);
  Index K = 4;
  EmOptions em;
  std::vector<FrameConfig> frames;
  std::optional<std::filesystem::path> models_path;

  std::optional<Confidences> confidences;
  std::vector<std::pair<std::string, std::vector<double>>> confidence_groups;

  OptimizerConfig optimizer;
  /// Exploration scale for the GMM-mean baseline (meters).
  VectorXd gmm_noise_std = VectorXd::Constant(1, 0.01);
  BasisFamily basis;
  FreeMask free_mask;  // per frame (3 + D_O) or full length
  CostSpec cost;
  ArmModel arm = ArmModel::default_spatial();
  std::optional<VectorXd> q0;
  VectorXd q_init;
  double damping = 1e-6;

  std::vector<NamedAdjustments> baselines;
  std::optional<SelectionConfig> selection;

  std::filesystem::path output_dir = "out";

  Index output_dim() const { return spec.output_size(); }
  std::vector<std::string> frame_ids() const;
  const FrameConfig& frame(const std::string& id) const;
};

/// Names listed under "variants"; each variant is a JSON merge patch.
std::vector<std::string> variant_names(const json& j);
/// The config with the named variant's patch applied and "variants" removed.
json apply_variant(const json& j, const std::string& name);

/// Throws ConfigError with the offending key on any schema problem.
ExperimentConfig parse_experiment(const json& j, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_experiment(const std::filesystem::path& file);

std::vector<Demonstration> experiment_demos(const ExperimentConfig& cfg);

/// Training frames per demo: result[j][m] for frame j (trained frames only).
std::vector<std::vector<TaskFrame>> training_frames(const ExperimentConfig& cfg,
                                                    std::span<const Demonstration> demos);

/// Local models for every frame that trains its own model, keyed by id.
std::vector<LocalModel> learn_models(const ExperimentConfig& cfg,
                                     std::span<const Demonstration> demos);

/// One model per configured frame (resolving model_of), in frame order.
std::vector<LocalModel> models_for_frames(const ExperimentConfig& cfg,
                                          std::span<const LocalModel> trained,
                                          std::span<const std::string> ids);
std::vector<TaskFrame> frames_for(const ExperimentConfig& cfg, std::span<const std::string> ids);

/// Reproduction input grid: time column of the first demonstration.
MatrixXd reproduction_inputs(std::span<const Demonstration> demos, const BlockSpec& spec);

/// Problem over the frames `ids` (all frames when empty). q0 defaults to the
/// IK solution at the start of the unadjusted reproduction.
OptimizationProblem build_problem(const ExperimentConfig& cfg, std::span<const LocalModel> trained,
                                  std::span<const Demonstration> demos,
                                  std::span<const std::string> ids = {});
SelectionTemplate build_selection_template(const ExperimentConfig& cfg,
                                           std::span<const LocalModel> trained,
                                           std::span<const Demonstration> demos);
std::vector<Candidate> build_candidates(const ExperimentConfig& cfg,
                                        std::span<const LocalModel> trained);

/// Frames of `problem` with a fixed adjustment set applied.
std::vector<TaskFrame> apply_adjustments(const OptimizationProblem& problem,
                                         std::span<const FrameAdjustment> adjustments);

// ---------------------------------------------------------------------------
// Serialization

json to_json(const MatrixXd& m);
json to_json(const VectorXd& v);
MatrixXd matrix_from_json(const json& j, const std::string& key);
VectorXd vector_from_json(const json& j, const std::string& key);

json frame_to_json(const TaskFrame& frame);
TaskFrame frame_from_json(const json& j, Index dim, const std::string& key);

json models_to_json(std::span<const LocalModel> models);
std::vector<LocalModel> models_from_json(const json& j);

json selection_to_json(const SelectionReport& report);

void write_json(const json& j, const std::filesystem::path& file);
json read_json(const std::filesystem::path& file);

/// t, mean columns, trace of the covariance.
void write_trajectory_csv(const std::filesystem::path& file, const MatrixXd& inputs,
                          std::span<const Gaussian> seq);
/// t, q1..qn, x, y, z.
void write_joint_csv(const std::filesystem::path& file, const MatrixXd& inputs,
                     const MatrixXd& q_seq, const MatrixXd& positions);
void write_cost_curve_csv(const std::filesystem::path& file, std::span<const CostCurveRow> rows);

}  // namespace tpmove

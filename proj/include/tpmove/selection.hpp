// Copyright 2026 The tpmove Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "tpmove/policy.hpp"

namespace tpmove {

struct Candidate {
  LocalModel model;
  TaskFrame frame;
};

/// Everything about an optimization problem except the frames and models,
/// which forward_select fills per candidate set.
struct SelectionTemplate {
  MatrixXd inputs;
  double dt = 0.0;
  /// Free coordinates of one frame (3 + D_O entries), repeated per frame.
  FreeMask frame_mask;
  CostSpec cost;
  ArmModel arm;
  VectorXd q0;
  double damping = 1e-6;
  BasisFamily basis;
};

struct SetEvaluation {
  std::vector<std::string> candidate_set;
  /// Mean of the best noise-free cost over the seeded runs.
  double final_cost = 0.0;
  std::vector<double> run_costs;
  /// Curve of the first run.
  std::vector<CostCurveRow> cost_curve;
};

struct SelectionRound {
  std::vector<SetEvaluation> evaluations;
  std::string winner;
  std::string rationale;
};

struct SelectionReport {
  std::vector<SelectionRound> rounds;
  std::vector<std::string> chosen;
};

OptimizationProblem make_problem(const SelectionTemplate& tmpl,
                                 const std::vector<const Candidate*>& set);

/// Greedy forward search: each round adds the remaining candidate whose set
/// has the lowest optimized cost. Runs r use seed config.seed + r in every
/// round, so all sets see the same exploration streams. From round 2 on, run r
/// starts the already chosen frames at run r's best parameters of the
/// previous winner and the new frame at zero adjustment.
SelectionReport forward_select(const std::vector<Candidate>& candidates,
                               const SelectionTemplate& tmpl, const OptimizerConfig& config,
                               Index max_frames, Index runs_per_eval);

}  // namespace tpmove

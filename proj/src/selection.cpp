// Copyright 2026 The tpmove Authors
// SPDX-License-Identifier: Apache-2.0

#include "tpmove/selection.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

#include "tpmove/error.hpp"

namespace tpmove {
namespace {

// Theta for `prev_frames + 1` frames: previous adjustments per basis function,
// zero for the new frame.
VectorXd extend_theta(const VectorXd& prev, Index basis_size, Index prev_frames, Index per_frame) {
  const Index old_block = prev_frames * per_frame;
  const Index new_block = old_block + per_frame;
  VectorXd out = VectorXd::Zero(basis_size * new_block);
  for (Index b = 0; b < basis_size; ++b) out.segment(b * new_block, old_block) = prev.segment(b * old_block, old_block);
  return out;
}

}  // namespace

OptimizationProblem make_problem(const SelectionTemplate& tmpl,
                                 const std::vector<const Candidate*>& set) {
  OptimizationProblem p;
  for (const Candidate* c : set) {
    p.models.push_back(c->model);
    p.frames.push_back(c->frame);
  }
  p.inputs = tmpl.inputs;
  p.dt = tmpl.dt;
  p.free_mask = repeat_mask(tmpl.frame_mask, static_cast<Index>(set.size()));
  p.cost = tmpl.cost;
  p.arm = tmpl.arm;
  p.q0 = tmpl.q0;
  p.damping = tmpl.damping;
  p.basis = tmpl.basis;
  return p;
}

SelectionReport forward_select(const std::vector<Candidate>& candidates,
                               const SelectionTemplate& tmpl, const OptimizerConfig& config,
                               Index max_frames, Index runs_per_eval) {
  const Index n = static_cast<Index>(candidates.size());
  if (n < 2) throw Error(ErrorCode::InsufficientCandidates, "forward search needs at least two candidates");
  if (max_frames < 1 || max_frames > n) {
    throw Error(ErrorCode::InsufficientCandidates, "max_frames must lie in [1, " + std::to_string(n) + "]");
  }
  if (runs_per_eval < 1) throw Error(ErrorCode::InvalidSpec, "runs_per_eval must be >= 1");
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      if (candidates[static_cast<std::size_t>(i)].model.frame_id ==
          candidates[static_cast<std::size_t>(j)].model.frame_id) {
        throw Error(ErrorCode::InvalidSpec, "duplicate candidate id " +
                                                candidates[static_cast<std::size_t>(i)].model.frame_id);
      }
    }
  }

  // Candidates are visited in id order so equal costs go to the lower id.
  std::vector<std::size_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].model.frame_id < candidates[b].model.frame_id;
  });

  const Index basis_size = tmpl.basis.size();
  const Index per_frame = static_cast<Index>(tmpl.frame_mask.size());

  SelectionReport report;
  std::vector<std::size_t> chosen;
  // Best theta of the chosen set, per run; warm start for the next round.
  std::vector<VectorXd> warm(static_cast<std::size_t>(runs_per_eval));
  while (static_cast<Index>(chosen.size()) < max_frames) {
    SelectionRound round;
    double best_cost = std::numeric_limits<double>::infinity();
    std::size_t best = order.size();
    std::vector<VectorXd> best_thetas;
    for (std::size_t idx : order) {
      if (std::find(chosen.begin(), chosen.end(), idx) != chosen.end()) continue;
      std::vector<const Candidate*> set;
      for (std::size_t c : chosen) set.push_back(&candidates[c]);
      set.push_back(&candidates[idx]);
      const OptimizationProblem problem = make_problem(tmpl, set);

      SetEvaluation eval;
      for (const Candidate* c : set) eval.candidate_set.push_back(c->model.frame_id);
      double total = 0.0;
      std::vector<VectorXd> thetas;
      for (Index r = 0; r < runs_per_eval; ++r) {
        OptimizerConfig run = config;
        run.seed = config.seed + static_cast<std::uint64_t>(r);
        const VectorXd theta0 =
            chosen.empty() ? VectorXd()
                           : extend_theta(warm[static_cast<std::size_t>(r)], basis_size,
                                          static_cast<Index>(chosen.size()), per_frame);
        OptimizationResult res = optimize(problem, run, theta0);
        total += res.best_cost;
        eval.run_costs.push_back(res.best_cost);
        thetas.push_back(res.best_theta);
        if (r == 0) eval.cost_curve = std::move(res.cost_curve);
      }
      eval.final_cost = total / static_cast<double>(runs_per_eval);
      if (eval.final_cost < best_cost) {
        best_cost = eval.final_cost;
        best = idx;
        best_thetas = std::move(thetas);
      }
      round.evaluations.push_back(std::move(eval));
    }
    if (best == order.size()) throw Error(ErrorCode::NonFiniteCost, "no candidate set produced a finite cost");
    chosen.push_back(best);
    warm = std::move(best_thetas);
    round.winner = candidates[best].model.frame_id;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "adding %s gives the lowest mean optimized cost %.6g over %lld run(s)",
                  round.winner.c_str(), best_cost, static_cast<long long>(runs_per_eval));
    round.rationale = buf;
    report.chosen.push_back(round.winner);
    report.rounds.push_back(std::move(round));
  }
  return report;
}

}  // namespace tpmove

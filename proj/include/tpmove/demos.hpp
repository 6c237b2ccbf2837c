// Copyright 2026 The tpmove Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "tpmove/task_frames.hpp"

namespace tpmove {

/// Intermediate keypoint the demonstrations stop at.
struct ViaPoint {
  double time = 0.0;
  VectorXd position;
};

/// Synthetic reaching demonstrations: minimum-jerk profile from start to
/// target (through optional via points), a half-sine lateral bow of amplitude
/// `curvature`, and smooth per-demo perturbations of scale `noise_std`.
struct DemoSpec {
  VectorXd start;
  VectorXd target;
  double duration = 2.0;
  Index steps = 100;
  Index count = 10;
  double curvature = 0.0;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  std::vector<ViaPoint> via;
  /// Preferred bow direction; its component orthogonal to each segment is
  /// used. Defaults to the horizontal normal of the segment.
  std::optional<VectorXd> bow_direction;

  void validate() const;
};

/// 10 tau^3 - 15 tau^4 + 6 tau^5.
double min_jerk(double tau);

/// Generates spec.count demos with rows (t, x_1..x_d). Every demo starts at
/// `start` and ends at `target` bitwise.
std::vector<Demonstration> generate_reaching(const DemoSpec& spec);

/// spec.count demos, each generated with its own target and via points drawn
/// around the spec's values with standard deviation `keypoint_jitter`. The
/// start is shared.
std::vector<Demonstration> generate_varied_corpus(const DemoSpec& spec, double keypoint_jitter);

/// Frame per demonstration at the point sampled closest to `time`: A = I,
/// output block translated to that point, input block untouched.
std::vector<TaskFrame> keypoint_frames(std::span<const Demonstration> demos, const BlockSpec& spec,
                                       double time);

/// CSV with header t,x1,...,xd; 17 significant digits.
void save_demo(const Demonstration& demo, const std::filesystem::path& file);
Demonstration load_demo(const std::filesystem::path& file);

/// Writes demo_000.csv, demo_001.csv, ... into `dir`.
void save_demos(std::span<const Demonstration> demos, const std::filesystem::path& dir);
/// Loads a single CSV file, or every *.csv of a directory in name order.
std::vector<Demonstration> load_demos(const std::filesystem::path& path);

}  // namespace tpmove

// Copyright 2026 The tpmove Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace tpmove::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color;
  bool markers = false;
};

/// Axis-aligned rectangle outline (obstacle projection).
struct Box {
  double x0, y0, x1, y1;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::vector<Box> boxes;
  bool equal_aspect = false;
};

std::string render(const Plot& plot, int width = 640, int height = 480);

}  // namespace tpmove::svg

// Copyright 2026 The tpmove Authors
// SPDX-License-Identifier: Apache-2.0

#include "tpmove/demos.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "tpmove/error.hpp"

namespace tpmove {
namespace {

struct Keypoint {
  double time;
  VectorXd position;
};

VectorXd lateral_direction(const VectorXd& seg, const std::optional<VectorXd>& preferred) {
  const Index d = seg.size();
  const double len = seg.norm();
  if (len == 0.0) return VectorXd::Zero(d);
  const VectorXd u = seg / len;
  auto orthogonal = [&](const VectorXd& v) -> std::optional<VectorXd> {
    const VectorXd w = v - v.dot(u) * u;
    if (w.norm() < 1e-9) return std::nullopt;
    return VectorXd(w.normalized());
  };
  if (preferred && preferred->size() == d) {
    if (auto w = orthogonal(*preferred)) return *w;
  }
  if (d == 2) return VectorXd(Eigen::Vector2d(-u(1), u(0)));
  if (d == 3) {
    const Eigen::Vector3d u3 = u;
    Eigen::Vector3d w = u3.cross(Eigen::Vector3d::UnitZ());
    if (w.norm() < 1e-9) w = u3.cross(Eigen::Vector3d::UnitX());
    return VectorXd(w.normalized());
  }
  for (Index i = 0; i < d; ++i) {
    if (auto w = orthogonal(VectorXd::Unit(d, i))) return *w;
  }
  return VectorXd::Zero(d);
}

[[noreturn]] void malformed(const std::filesystem::path& file, std::size_t line, const std::string& what) {
  throw Error(ErrorCode::MalformedCsv, file.string() + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

void DemoSpec::validate() const {
  if (start.size() == 0 || start.size() != target.size()) {
    throw Error(ErrorCode::InvalidSpec, "start and target must be non-empty and equally sized");
  }
  if (steps < 2) throw Error(ErrorCode::InvalidSpec, "at least two steps are required");
  if (count < 1) throw Error(ErrorCode::InvalidSpec, "at least one demonstration is required");
  if (!(duration > 0.0)) throw Error(ErrorCode::InvalidSpec, "duration must be positive");
  if (!(noise_std >= 0.0)) throw Error(ErrorCode::InvalidSpec, "noise_std must be non-negative");
  if (!std::isfinite(curvature)) throw Error(ErrorCode::InvalidSpec, "curvature must be finite");
  double last = 0.0;
  for (const auto& v : via) {
    if (!(v.time > last && v.time < duration)) {
      throw Error(ErrorCode::InvalidSpec, "via times must increase strictly inside (0, duration)");
    }
    if (v.position.size() != start.size()) throw Error(ErrorCode::InvalidSpec, "via point dimension");
    last = v.time;
  }
}

double min_jerk(double tau) {
  const double t3 = tau * tau * tau;
  return t3 * (10.0 - 15.0 * tau + 6.0 * tau * tau);
}

std::vector<Demonstration> generate_reaching(const DemoSpec& spec) {
  spec.validate();
  const Index dout = spec.start.size();
  const Index n = spec.steps;
  const double dt = spec.duration / static_cast<double>(n - 1);

  std::vector<Keypoint> keys{{0.0, spec.start}};
  for (const auto& v : spec.via) keys.push_back({v.time, v.position});
  keys.push_back({spec.duration, spec.target});
  const std::size_t segments = keys.size() - 1;

  std::vector<VectorXd> lateral;
  for (std::size_t k = 0; k < segments; ++k) {
    lateral.push_back(lateral_direction(keys[k + 1].position - keys[k].position, spec.bow_direction));
  }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Demonstration> demos;
  for (Index m = 0; m < spec.count; ++m) {
    std::vector<VectorXd> bump(segments), ripple(segments);
    for (std::size_t k = 0; k < segments; ++k) {
      bump[k] = VectorXd(dout);
      ripple[k] = VectorXd(dout);
      for (Index i = 0; i < dout; ++i) bump[k](i) = spec.noise_std * normal(rng);
      for (Index i = 0; i < dout; ++i) ripple[k](i) = 0.5 * spec.noise_std * normal(rng);
    }

    Demonstration demo{MatrixXd(n, dout + 1), dt};
    std::size_t k = 0;
    for (Index i = 0; i < n; ++i) {
      const double t = i == n - 1 ? spec.duration : static_cast<double>(i) * dt;
      while (k + 1 < segments && t >= keys[k + 1].time) ++k;
      const double t0 = keys[k].time;
      const double t1 = keys[k + 1].time;
      const double tau = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
      VectorXd p = keys[k].position + min_jerk(tau) * (keys[k + 1].position - keys[k].position);
      const double bow = std::sin(std::numbers::pi * tau);
      p += bow * (spec.curvature * lateral[k] + bump[k]);
      p += std::sin(2.0 * std::numbers::pi * tau) * ripple[k];
      for (const auto& key : keys) {
        if (std::abs(t - key.time) <= 1e-9 * spec.duration) p = key.position;
      }
      demo.points(i, 0) = t;
      demo.points.row(i).tail(dout) = p.transpose();
    }
    demo.points.row(0).tail(dout) = spec.start.transpose();
    demo.points.row(n - 1).tail(dout) = spec.target.transpose();
    demos.push_back(std::move(demo));
  }
  return demos;
}

std::vector<Demonstration> generate_varied_corpus(const DemoSpec& spec, double keypoint_jitter) {
  spec.validate();
  if (!(keypoint_jitter >= 0.0)) throw Error(ErrorCode::InvalidSpec, "jitter must be non-negative");
  std::mt19937_64 rng(spec.seed ^ 0x9E3779B97F4A7C15ULL);
  std::normal_distribution<double> normal(0.0, keypoint_jitter);
  auto jitter = [&](const VectorXd& p) {
    VectorXd out = p;
    for (Index i = 0; i < out.size(); ++i) out(i) += keypoint_jitter > 0.0 ? normal(rng) : 0.0;
    return out;
  };
  std::vector<Demonstration> demos;
  for (Index m = 0; m < spec.count; ++m) {
    DemoSpec one = spec;
    one.count = 1;
    one.seed = spec.seed + 7919ULL * static_cast<std::uint64_t>(m + 1);
    for (auto& v : one.via) v.position = jitter(v.position);
    one.target = jitter(spec.target);
    demos.push_back(generate_reaching(one).front());
  }
  return demos;
}

std::vector<TaskFrame> keypoint_frames(std::span<const Demonstration> demos, const BlockSpec& spec,
                                       double time) {
  std::vector<TaskFrame> frames;
  for (const auto& demo : demos) {
    if (demo.dim() != spec.dim()) throw Error(ErrorCode::DimensionMismatch, "demo does not match spec");
    const Index idx = std::clamp<Index>(static_cast<Index>(std::llround(time / demo.dt)), 0,
                                        demo.steps() - 1);
    VectorXd b = VectorXd::Zero(spec.dim());
    const VectorXd row = demo.points.row(idx).transpose();
    b(spec.output_dims) = row(spec.output_dims);
    frames.push_back(TaskFrame::translation(std::move(b)));
  }
  return frames;
}

// ---------------------------------------------------------------------------
// CSV

void save_demo(const Demonstration& demo, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + file.string());
  out << "t";
  for (Index j = 1; j < demo.dim(); ++j) out << ",x" << j;
  out << '\n';
  char buf[32];
  for (Index i = 0; i < demo.steps(); ++i) {
    for (Index j = 0; j < demo.dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", demo.points(i, j));
      out << (j == 0 ? "" : ",") << buf;
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + file.string());
}

Demonstration load_demo(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + file.string());
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    header = split_csv(line);
    break;
  }
  if (header.empty()) malformed(file, line_no, "empty file");
  if (header.front() != "t" || header.size() < 2) malformed(file, line_no, "header must be t,x1,...,xd");

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != header.size()) {
      malformed(file, line_no, "expected " + std::to_string(header.size()) + " columns, found " +
                                   std::to_string(fields.size()));
    }
    std::vector<double> row;
    for (const auto& f : fields) {
      char* end = nullptr;
      const double v = std::strtod(f.c_str(), &end);
      if (f.empty() || end != f.c_str() + f.size() || !std::isfinite(v)) {
        malformed(file, line_no, "not a number: '" + f + "'");
      }
      row.push_back(v);
    }
    if (!rows.empty() && !(row[0] > rows.back()[0])) malformed(file, line_no, "time must increase");
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) malformed(file, line_no, "at least two samples are required");

  Demonstration demo{MatrixXd(static_cast<Index>(rows.size()), static_cast<Index>(header.size())),
                     rows[1][0] - rows[0][0]};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < header.size(); ++j) {
      demo.points(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
  }
  return demo;
}

void save_demos(std::span<const Demonstration> demos, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string());
  char name[32];
  for (std::size_t m = 0; m < demos.size(); ++m) {
    std::snprintf(name, sizeof(name), "demo_%03zu.csv", m);
    save_demo(demos[m], dir / name);
  }
}

std::vector<Demonstration> load_demos(const std::filesystem::path& path) {
  if (std::filesystem::is_regular_file(path)) return {load_demo(path)};
  if (!std::filesystem::is_directory(path)) throw Error(ErrorCode::IoError, "no such path " + path.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(path)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::IoError, "no CSV files in " + path.string());
  std::vector<Demonstration> demos;
  for (const auto& f : files) demos.push_back(load_demo(f));
  return demos;
}

}  // namespace tpmove

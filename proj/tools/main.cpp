// Copyright 2026 The tpmove Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "svg.hpp"
#include "tpmove/error.hpp"
#include "tpmove/experiment.hpp"

namespace fs = std::filesystem;
using namespace tpmove;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  Index parallel = 1;
  std::string models;
  std::string frames;
  std::string variant;
  std::string method = "frames";
  std::vector<std::string> inputs;
};

int verbosity() {
  const char* v = std::getenv("TPMOVE_LOG");
  return v ? std::atoi(v) : 0;
}

void log(const std::string& msg) {
  if (verbosity() > 0) std::cerr << "[tpmove] " << msg << '\n';
}

ExperimentConfig load(const Options& opt) {
  if (opt.config.empty()) throw Error(ErrorCode::ConfigError, "--config is required");
  json j = read_json(opt.config);
  if (!opt.variant.empty()) {
    j = apply_variant(j, opt.variant);
  } else if (const auto names = variant_names(j); !names.empty()) {
    j = apply_variant(j, names.front());
  }
  if (opt.seed) j["seed"] = *opt.seed;
  ExperimentConfig cfg = parse_experiment(j, fs::path(opt.config).parent_path());
  if (!opt.out.empty()) cfg.output_dir = opt.out;
  cfg.optimizer.parallel = opt.parallel;
  if (!opt.models.empty()) cfg.models_path = opt.models;
  fs::create_directories(cfg.output_dir);
  return cfg;
}

std::vector<LocalModel> trained_models(const ExperimentConfig& cfg, std::span<const Demonstration> demos) {
  if (cfg.models_path) {
    log("loading models from " + cfg.models_path->string());
    return models_from_json(read_json(*cfg.models_path));
  }
  log("fitting local models");
  return learn_models(cfg, demos);
}

int cmd_gen_demos(const Options& opt) {
  const ExperimentConfig cfg = load(opt);
  if (cfg.demo_path) throw Error(ErrorCode::ConfigError, "demos: gen-demos needs a generator spec, not a path");
  const auto demos = experiment_demos(cfg);
  save_demos(demos, cfg.output_dir / "demos");
  log("wrote " + std::to_string(demos.size()) + " demos");
  return 0;
}

int cmd_learn(const Options& opt) {
  const ExperimentConfig cfg = load(opt);
  const auto demos = experiment_demos(cfg);
  write_json(models_to_json(learn_models(cfg, demos)), cfg.output_dir / "models.json");
  return 0;
}

std::vector<TaskFrame> override_frames(const Options& opt, const ExperimentConfig& cfg,
                                       std::vector<TaskFrame> frames) {
  if (opt.frames.empty()) return frames;
  const json j = read_json(opt.frames);
  const json& list = j.contains("frames") ? j["frames"] : j;
  if (!list.is_array() || list.size() != frames.size()) {
    throw Error(ErrorCode::ConfigError, "--frames: expected " + std::to_string(frames.size()) + " frames");
  }
  for (std::size_t i = 0; i < frames.size(); ++i) {
    frames[i] = frame_from_json(list[i], cfg.spec.dim(), "frames[" + std::to_string(i) + "]");
  }
  return frames;
}

json frames_json(const ExperimentConfig& cfg, std::span<const TaskFrame> frames) {
  json list = json::array();
  const auto ids = cfg.frame_ids();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    json f = frame_to_json(frames[i]);
    f["id"] = ids[i];
    list.push_back(std::move(f));
  }
  return json{{"frames", list}};
}

int cmd_reproduce(const Options& opt) {
  const ExperimentConfig cfg = load(opt);
  const auto demos = experiment_demos(cfg);
  const auto trained = trained_models(cfg, demos);
  const auto ids = cfg.frame_ids();
  const auto models = models_for_frames(cfg, trained, ids);
  const auto frames = override_frames(opt, cfg, frames_for(cfg, ids));
  const MatrixXd inputs = reproduction_inputs(demos, cfg.spec);
  write_trajectory_csv(cfg.output_dir / "trajectory.csv", inputs,
                       reproduce(models, frames, inputs, cfg.confidences));
  for (const auto& [name, c] : cfg.confidence_groups) {
    write_trajectory_csv(cfg.output_dir / ("trajectory_" + name + ".csv"), inputs,
                         reproduce(models, frames, inputs, constant_confidences(c)));
  }
  write_json(frames_json(cfg, frames), cfg.output_dir / "frames.json");
  return 0;
}

int cmd_optimize(const Options& opt) {
  const ExperimentConfig cfg = load(opt);
  const auto demos = experiment_demos(cfg);
  const auto trained = trained_models(cfg, demos);
  OptimizationProblem problem = build_problem(cfg, trained, demos);
  problem.frames = override_frames(opt, cfg, problem.frames);
  OptimizationResult res;
  Index parameters = 0;
  if (opt.method == "gmm-means") {
    OptimizerConfig oc = cfg.optimizer;
    oc.noise_std = cfg.gmm_noise_std;
    parameters = gmm_mean_parameter_count(problem.models);
    log("optimizing " + std::to_string(parameters) + " mean coordinates");
    res = optimize_gmm_means(problem, oc);
  } else {
    parameters = searched_parameter_count(problem);
    log("optimizing " + std::to_string(parameters) + " frame parameters");
    res = optimize(problem, cfg.optimizer);
  }

  write_json(frames_json(cfg, res.final_frames), cfg.output_dir / "optimized_frames.json");
  const auto seq = reproduce(res.final_models, res.final_frames, problem.inputs, problem.confidences);
  write_trajectory_csv(cfg.output_dir / "trajectory.csv", problem.inputs, seq);
  write_joint_csv(cfg.output_dir / "joints.csv", problem.inputs, res.final_joints,
                  forward_kinematics(problem.arm, res.final_joints));
  write_cost_curve_csv(cfg.output_dir / "cost_curve.csv", res.cost_curve);

  json baselines = json::object();
  for (const auto& b : cfg.baselines) {
    baselines[b.name] = evaluate_frames(problem, apply_adjustments(problem, b.adjustments)).cost;
  }
  json summary = {{"initial_cost", res.initial_cost},
                  {"final_cost", res.best_cost},
                  {"rollouts", res.rollouts},
                  {"method", opt.method},
                  {"parameter_count", parameters},
                  {"best_theta", to_json(res.best_theta)},
                  {"baselines", baselines}};
  if (problem.cost.obstacle.half_u > 0.0 && problem.cost.obstacle.half_v > 0.0) {
    summary["crosses_obstacle"] =
        crosses_obstacle(forward_kinematics(problem.arm, res.final_joints), problem.cost.obstacle);
  }
  write_json(summary, cfg.output_dir / "summary.json");
  return 0;
}

std::string set_name(const std::vector<std::string>& ids) {
  std::string s;
  for (const auto& id : ids) s += (s.empty() ? "" : "+") + id;
  return s;
}

int cmd_select_frames(const Options& opt) {
  const ExperimentConfig cfg = load(opt);
  if (!cfg.selection) throw Error(ErrorCode::ConfigError, "selection: required for select-frames");
  const auto demos = experiment_demos(cfg);
  const auto trained = trained_models(cfg, demos);
  const auto candidates = build_candidates(cfg, trained);
  const SelectionTemplate tmpl = build_selection_template(cfg, trained, demos);
  const SelectionReport report = forward_select(candidates, tmpl, cfg.optimizer, cfg.selection->max_frames,
                                                cfg.selection->runs_per_eval);
  write_json(selection_to_json(report), cfg.output_dir / "selection.json");
  for (std::size_t r = 0; r < report.rounds.size(); ++r) {
    for (const auto& e : report.rounds[r].evaluations) {
      write_cost_curve_csv(cfg.output_dir / ("round" + std::to_string(r + 1) + "_" + set_name(e.candidate_set) + ".csv"),
                           e.cost_curve);
    }
  }
  return 0;
}

// Plain numeric CSV with a header row; "nan" cells are kept.
std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_table(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + file.string());
  std::string line;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    if (header.empty()) {
      while (std::getline(ss, cell, ',')) header.push_back(cell);
      continue;
    }
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      row.push_back(std::strtod(cell.c_str(), &end));
      if (end == cell.c_str()) throw Error(ErrorCode::MalformedCsv, file.string() + ":" + std::to_string(n));
    }
    if (row.size() != header.size()) throw Error(ErrorCode::MalformedCsv, file.string() + ":" + std::to_string(n));
    rows.push_back(std::move(row));
  }
  if (header.empty()) throw Error(ErrorCode::MalformedCsv, file.string() + ": empty file");
  return {header, rows};
}

std::vector<double> column(const std::vector<std::vector<double>>& rows, std::size_t c) {
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

int cmd_plot(const Options& opt) {
  if (opt.inputs.empty()) throw Error(ErrorCode::ConfigError, "plot: no input files");
  std::optional<ExperimentConfig> cfg;
  if (!opt.config.empty()) cfg = load(opt);
  const fs::path out_dir = !opt.out.empty() ? fs::path(opt.out) : cfg ? cfg->output_dir : fs::path(".");
  fs::create_directories(out_dir);

  svg::Plot traj{"trajectories (x-y)", "x [m]", "y [m]", {}, {}, true};
  for (const auto& input : opt.inputs) {
    const auto [header, rows] = read_table(input);
    const std::string stem = fs::path(input).stem().string();
    if (header.front() == "update_index") {
      svg::Plot p{"cost curve: " + stem, "update", "cost", {}, {}, false};
      p.series.push_back({"noise-free", column(rows, 0), column(rows, 1), "", false});
      p.series.push_back({"batch mean", column(rows, 0), column(rows, 2), "", false});
      std::ofstream(out_dir / (stem + ".svg")) << svg::render(p);
    } else if (header.size() >= 3 && header.front() == "t") {
      const std::size_t x = header[1] == "q1" ? header.size() - 3 : 1;
      traj.series.push_back({stem, column(rows, x), column(rows, x + 1), "", false});
    } else {
      throw Error(ErrorCode::MalformedCsv, input + ": unrecognized table");
    }
  }
  if (!traj.series.empty()) {
    if (cfg) {
      svg::Series origins{"frame origins", {}, {}, "#000", true};
      for (const auto& f : cfg->frames) {
        const VectorXd b = f.frame.b_out(cfg->spec);
        origins.x.push_back(b(0));
        origins.y.push_back(b.size() > 1 ? b(1) : 0.0);
      }
      traj.series.push_back(origins);
      if (cfg->cost.kind == CostKind::Obstacle) {
        const Obstacle& o = cfg->cost.obstacle;
        double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
        for (int su : {-1, 1}) {
          for (int sv : {-1, 1}) {
            const Eigen::Vector3d c = o.center + su * o.half_u * o.axis_u + sv * o.half_v * o.axis_v;
            x0 = std::min(x0, c.x()); x1 = std::max(x1, c.x());
            y0 = std::min(y0, c.y()); y1 = std::max(y1, c.y());
          }
        }
        traj.boxes.push_back({x0, y0, x1, y1});
      }
    }
    std::ofstream(out_dir / "trajectories.svg") << svg::render(traj);
  }
  return 0;
}

void report_error(const std::string& code, const std::string& message) {
  std::cerr << json{{"error", code}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Task-parameterized movement learning with frame-parameter policy search"};
  app.require_subcommand(1);
  Options opt;
  auto common = [&](CLI::App* sub, bool config_required = true) {
    auto* c = sub->add_option("--config", opt.config, "experiment JSON");
    if (config_required) c->required();
    sub->add_option("--seed", opt.seed, "overrides the config seed");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--parallel", opt.parallel, "rollout worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--variant", opt.variant, "named config variant (default: the first)");
  };
  auto* gen = app.add_subcommand("gen-demos", "generate synthetic demonstrations as CSV");
  common(gen);
  auto* learn = app.add_subcommand("learn", "fit one GMM per task frame");
  common(learn);
  auto* repro = app.add_subcommand("reproduce", "retrieve the fused trajectory");
  common(repro);
  repro->add_option("--models", opt.models, "models JSON from learn");
  repro->add_option("--frames", opt.frames, "frames JSON replacing the configured frames");
  auto* optim = app.add_subcommand("optimize", "search frame adjustments with PI2");
  common(optim);
  optim->add_option("--models", opt.models, "models JSON from learn");
  optim->add_option("--frames", opt.frames, "frames JSON replacing the configured frames");
  optim->add_option("--method", opt.method, "search space")->check(CLI::IsMember({"frames", "gmm-means"}));
  auto* select = app.add_subcommand("select-frames", "greedy forward search over candidate frames");
  common(select);
  select->add_option("--models", opt.models, "models JSON from learn");
  auto* plot = app.add_subcommand("plot", "render trajectory and cost-curve CSVs as SVG");
  common(plot, false);
  plot->add_option("inputs", opt.inputs, "CSV files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("ConfigError", e.what());
    return 2;
  }

  try {
    if (*gen) return cmd_gen_demos(opt);
    if (*learn) return cmd_learn(opt);
    if (*repro) return cmd_reproduce(opt);
    if (*optim) return cmd_optimize(opt);
    if (*select) return cmd_select_frames(opt);
    if (*plot) return cmd_plot(opt);
  } catch (const Error& e) {
    report_error(std::string(to_string(e.code())), e.what());
    return is_input_error(e.code()) ? 2 : 3;
  } catch (const fs::filesystem_error& e) {
    report_error("IoError", e.what());
    return 2;
  } catch (const std::exception& e) {
    report_error("InternalError", e.what());
    return 3;
  }
  return 0;
}

// Copyright 2026 The tpmove Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tpmove/costs.hpp"
#include "tpmove/error.hpp"
#include "tpmove/experiment.hpp"

namespace py = pybind11;
using namespace tpmove;

namespace {

py::dict gmm_dict(const GMM& g) {
  py::list means, covs;
  for (const auto& c : g.components) {
    means.append(c.mean);
    covs.append(c.covariance);
  }
  py::dict d;
  d["weights"] = g.weights;
  d["means"] = means;
  d["covariances"] = covs;
  return d;
}

std::vector<Gaussian> gaussians(const std::vector<VectorXd>& means, const std::vector<MatrixXd>& covs) {
  if (means.size() != covs.size()) throw Error(ErrorCode::LengthMismatch, "means and covariances differ in count");
  std::vector<Gaussian> out;
  for (std::size_t i = 0; i < means.size(); ++i) out.emplace_back(means[i], covs[i]);
  return out;
}

py::dict curve_dict(const std::vector<CostCurveRow>& rows) {
  std::vector<Index> rollouts;
  std::vector<double> noise_free, batch_mean, best;
  for (const auto& r : rows) {
    rollouts.push_back(r.rollouts);
    noise_free.push_back(r.noise_free_cost);
    batch_mean.push_back(r.batch_mean);
    best.push_back(r.best_cost);
  }
  py::dict d;
  d["rollouts"] = rollouts;
  d["noise_free_cost"] = noise_free;
  d["batch_mean"] = batch_mean;
  d["best_cost"] = best;
  return d;
}

// Config, demos and trained models of one experiment.
struct Experiment {
  ExperimentConfig cfg;
  std::vector<Demonstration> demos;
  std::vector<LocalModel> trained;

  Experiment(const std::string& path, const std::string& variant, std::optional<std::uint64_t> seed) {
    json j = read_json(path);
    if (!variant.empty()) j = apply_variant(j, variant);
    if (seed) j["seed"] = *seed;
    cfg = parse_experiment(j, std::filesystem::path(path).parent_path());
    demos = experiment_demos(cfg);
    trained = learn_models(cfg, demos);
  }

  std::vector<MatrixXd> demo_points() const {
    std::vector<MatrixXd> out;
    for (const auto& d : demos) out.push_back(d.points);
    return out;
  }

  MatrixXd reproduce_means() const {
    const auto ids = cfg.frame_ids();
    const auto seq = reproduce(models_for_frames(cfg, trained, ids), frames_for(cfg, ids),
                               reproduction_inputs(demos, cfg.spec), cfg.confidences);
    return mean_trajectory(seq);
  }

  py::dict run_optimize(const std::string& method, Index parallel) const {
    const OptimizationProblem p = build_problem(cfg, trained, demos);
    OptimizerConfig oc = cfg.optimizer;
    oc.parallel = parallel;
    OptimizationResult res;
    Index params = 0;
    {
      py::gil_scoped_release release;
      if (method == "gmm-means") {
        oc.noise_std = cfg.gmm_noise_std;
        params = gmm_mean_parameter_count(p.models);
        res = optimize_gmm_means(p, oc);
      } else if (method == "frames") {
        params = searched_parameter_count(p);
        res = optimize(p, oc);
      } else {
        throw Error(ErrorCode::ConfigError, "method must be 'frames' or 'gmm-means'");
      }
    }
    py::dict d;
    d["initial_cost"] = res.initial_cost;
    d["best_cost"] = res.best_cost;
    d["best_theta"] = res.best_theta;
    d["parameter_count"] = params;
    d["rollouts"] = res.rollouts;
    d["cost_curve"] = curve_dict(res.cost_curve);
    d["trajectory"] = res.final_trajectory;
    d["joints"] = res.final_joints;
    if (p.cost.obstacle.half_u > 0.0 && p.cost.obstacle.half_v > 0.0) {
      d["crosses_obstacle"] = crosses_obstacle(forward_kinematics(p.arm, res.final_joints), p.cost.obstacle);
    }
    return d;
  }

  std::vector<std::string> select_frames() const {
    if (!cfg.selection) throw Error(ErrorCode::ConfigError, "selection: required for frame selection");
    const auto candidates = build_candidates(cfg, trained);
    const auto tmpl = build_selection_template(cfg, trained, demos);
    py::gil_scoped_release release;
    return forward_select(candidates, tmpl, cfg.optimizer, cfg.selection->max_frames, cfg.selection->runs_per_eval)
        .chosen;
  }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  // Raised with args (message, error code name).
  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error;
  error.call_once_and_store_result([&] { return py::exception<Error>(m, "Error", PyExc_RuntimeError); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error.get_stored(), py::make_tuple(e.what(), std::string(to_string(e.code()))));
    }
  });

  m.def(
      "gaussian_product",
      [](const std::vector<VectorXd>& means, const std::vector<MatrixXd>& covs, std::vector<double> confidences) {
        const auto fs = gaussians(means, covs);
        const Gaussian g = confidences.empty() ? gaussian_product(fs) : weighted_gaussian_product(fs, confidences);
        return py::make_tuple(g.mean, g.covariance);
      },
      py::arg("means"), py::arg("covariances"), py::arg("confidences") = std::vector<double>{});

  m.def(
      "em_fit",
      [](const MatrixXd& data, Index K, double reg, int max_iter, std::uint64_t seed) {
        EmOptions opt;
        opt.reg = reg;
        opt.max_iter = max_iter;
        opt.init = KMeansPlusPlusInit{seed};
        const EmReport rep = em_fit_report(data, K, opt);
        py::dict d = gmm_dict(rep.gmm);
        d["log_likelihood"] = rep.log_likelihood;
        d["iterations"] = rep.iterations;
        d["converged"] = rep.converged;
        return d;
      },
      py::arg("data"), py::arg("K"), py::arg("reg") = 1e-6, py::arg("max_iter") = 200, py::arg("seed") = 0);

  m.def(
      "pi2_weights", [](const std::vector<double>& costs, double kappa) { return pi2_weights(costs, kappa); },
      py::arg("costs"), py::arg("kappa") = 10.0);

  m.def(
      "forward_kinematics", [](const VectorXd& q) { return forward_kinematics(ArmModel::default_spatial(), q); },
      py::arg("q"));
  m.def(
      "jacobian", [](const VectorXd& q) { return jacobian(ArmModel::default_spatial(), q); }, py::arg("q"));
  m.def(
      "track",
      [](const VectorXd& q0, const MatrixXd& targets, double damping) {
        return track(ArmModel::default_spatial(), q0, targets, damping);
      },
      py::arg("q0"), py::arg("targets"), py::arg("damping") = 1e-6);
  m.def("home_posture", [] { return ArmModel::default_spatial().home; });

  py::class_<Experiment>(m, "Experiment")
      .def(py::init<const std::string&, const std::string&, std::optional<std::uint64_t>>(), py::arg("path"),
           py::arg("variant") = "", py::arg("seed") = py::none())
      .def_property_readonly("frame_ids", [](const Experiment& e) { return e.cfg.frame_ids(); })
      .def_property_readonly("seed", [](const Experiment& e) { return e.cfg.seed; })
      .def("demos", &Experiment::demo_points)
      .def("reproduce", &Experiment::reproduce_means)
      .def("optimize", &Experiment::run_optimize, py::arg("method") = "frames", py::arg("parallel") = 1)
      .def("select_frames", &Experiment::select_frames);
}

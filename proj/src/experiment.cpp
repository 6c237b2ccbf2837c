// Copyright 2026 The tpmove Authors
// SPDX-License-Identifier: Apache-2.0

#include "tpmove/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include "tpmove/error.hpp"

namespace tpmove {
namespace {

[[noreturn]] void config_error(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::ConfigError, key + ": " + what);
}

const json* find(const json& j, const std::string& key) {
  if (!j.is_object()) return nullptr;
  const auto it = j.find(key);
  return it == j.end() || it->is_null() ? nullptr : &*it;
}

double number(const json& j, const std::string& key, double fallback) {
  const json* v = find(j, key);
  if (!v) return fallback;
  if (!v->is_number()) config_error(key, "expected a number");
  return v->get<double>();
}

Index integer(const json& j, const std::string& key, Index fallback) {
  const json* v = find(j, key);
  if (!v) return fallback;
  if (!v->is_number_integer()) config_error(key, "expected an integer");
  return v->get<Index>();
}

std::string string(const json& j, const std::string& key, const std::string& fallback) {
  const json* v = find(j, key);
  if (!v) return fallback;
  if (!v->is_string()) config_error(key, "expected a string");
  return v->get<std::string>();
}

VectorXd vector_of(const json& v, const std::string& key) {
  if (!v.is_array()) config_error(key, "expected an array of numbers");
  VectorXd out(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) config_error(key, "expected an array of numbers");
    out(static_cast<Index>(i)) = v[i].get<double>();
  }
  return out;
}

MatrixXd matrix_of(const json& v, const std::string& key) {
  if (!v.is_array() || v.empty()) config_error(key, "expected a non-empty array of rows");
  const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
  MatrixXd out(static_cast<Index>(v.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < v.size(); ++r) {
    if (!v[r].is_array() || v[r].size() != cols) config_error(key, "rows must have equal length");
    out.row(static_cast<Index>(r)) = vector_of(v[r], key).transpose();
  }
  return out;
}

// Output-block position lifted into a full-dimension translation.
VectorXd lift(const VectorXd& position, const BlockSpec& spec, const std::string& key) {
  if (position.size() != spec.output_size()) config_error(key, "position must have the output dimension");
  VectorXd b = VectorXd::Zero(spec.dim());
  b(spec.output_dims) = position;
  return b;
}

TaskFrame frame_entry(const json& j, const BlockSpec& spec, const std::string& key) {
  if (find(j, "position")) return TaskFrame::translation(lift(vector_of(j["position"], key + ".position"), spec, key));
  return frame_from_json(j, spec.dim(), key);
}

FrameAdjustment adjustment_of(const json& j, Index dout, const std::string& key) {
  FrameAdjustment adj = FrameAdjustment::zero(dout);
  if (const json* a = find(j, "angles")) {
    const VectorXd v = vector_of(*a, key + ".angles");
    if (v.size() != 3) config_error(key + ".angles", "expected 3 angles");
    adj.angles = v;
  }
  if (const json* d = find(j, "displacement")) {
    const VectorXd v = vector_of(*d, key + ".displacement");
    if (v.size() != dout) config_error(key + ".displacement", "expected the output dimension");
    adj.displacement = v;
  }
  return adj;
}

DemoSpec demo_spec_of(const json& j, std::uint64_t seed) {
  DemoSpec s;
  if (!find(j, "start") || !find(j, "target")) config_error("demos", "start and target are required");
  s.start = vector_of(j["start"], "demos.start");
  s.target = vector_of(j["target"], "demos.target");
  s.duration = number(j, "duration", s.duration);
  s.steps = integer(j, "steps", s.steps);
  s.count = integer(j, "count", s.count);
  s.curvature = number(j, "curvature", s.curvature);
  s.noise_std = number(j, "noise_std", s.noise_std);
  s.seed = seed;
  if (const json* via = find(j, "via")) {
    if (!via->is_array()) config_error("demos.via", "expected an array");
    for (const auto& v : *via) {
      s.via.push_back({number(v, "time", 0.0), vector_of(v.value("position", json()), "demos.via.position")});
    }
  }
  if (const json* bow = find(j, "bow_direction")) s.bow_direction = vector_of(*bow, "demos.bow_direction");
  return s;
}

CostSpec cost_of(const json& j, Index dof) {
  CostSpec c;
  const std::string kind = string(j, "kind", "joint");
  if (kind == "joint") {
    c.kind = CostKind::Joint;
  } else if (kind == "obstacle") {
    c.kind = CostKind::Obstacle;
  } else if (kind == "via_point") {
    c.kind = CostKind::ViaPoint;
  } else {
    config_error("cost.kind", "unknown cost kind '" + kind + "'");
  }
  if (const json* w = find(j, "W")) {
    c.W = w->is_number() ? MatrixXd(w->get<double>() * MatrixXd::Identity(dof, dof)) : matrix_of(*w, "cost.W");
    if (c.W.rows() != dof || c.W.cols() != dof) config_error("cost.W", "must be dof x dof");
  }
  if (const json* o = find(j, "obstacle")) {
    c.obstacle.center = vector_of(o->value("center", json()), "cost.obstacle.center");
    c.obstacle.axis_u = vector_of(o->value("axis_u", json()), "cost.obstacle.axis_u");
    c.obstacle.axis_v = vector_of(o->value("axis_v", json()), "cost.obstacle.axis_v");
    c.obstacle.half_u = number(*o, "half_u", 0.0);
    c.obstacle.half_v = number(*o, "half_v", 0.0);
  } else if (c.kind == CostKind::Obstacle) {
    config_error("cost.obstacle", "required for the obstacle cost");
  }
  if (const json* k = find(j, "k")) {
    const VectorXd v = vector_of(*k, "cost.k");
    if (v.size() != 4) config_error("cost.k", "expected k1..k4");
    c.k = {v(0), v(1), v(2), v(3)};
  }
  if (const json* p = find(j, "p_s")) c.p_s = vector_of(*p, "cost.p_s");
  if (const json* p = find(j, "p_e")) c.p_e = vector_of(*p, "cost.p_e");
  c.t_s = number(j, "t_s", c.t_s);
  c.t_e = number(j, "t_e", c.t_e);
  c.k_p1 = number(j, "k_p1", c.k_p1);
  c.k_p2 = number(j, "k_p2", c.k_p2);
  return c;
}

ArmModel arm_of(const json& j) {
  ArmModel arm = ArmModel::default_spatial();
  const std::string variant = string(j, "variant", "spatial");
  if (variant == "planar") {
    arm = ArmModel::planar({0.3, 0.3, 0.2});
  } else if (variant != "spatial") {
    config_error("arm.variant", "expected 'spatial' or 'planar'");
  }
  if (const json* l = find(j, "link_lengths")) {
    const VectorXd v = vector_of(*l, "arm.link_lengths");
    arm.link_lengths.assign(v.data(), v.data() + v.size());
    if (!find(j, "joint_limits")) arm.joint_limits.clear();
    arm.home.resize(0);
  }
  if (const json* b = find(j, "base")) {
    const VectorXd v = vector_of(*b, "arm.base");
    if (v.size() != 3) config_error("arm.base", "expected x, y, z");
    arm.base = Eigen::Isometry3d::Identity();
    arm.base.translation() = v;
  }
  if (const json* h = find(j, "home")) arm.home = vector_of(*h, "arm.home");
  if (const json* lim = find(j, "joint_limits")) {
    const MatrixXd m = matrix_of(*lim, "arm.joint_limits");
    if (m.cols() != 2) config_error("arm.joint_limits", "expected [min, max] pairs");
    arm.joint_limits.clear();
    for (Index i = 0; i < m.rows(); ++i) arm.joint_limits.emplace_back(m(i, 0), m(i, 1));
  }
  return arm;
}

}  // namespace

std::vector<std::string> ExperimentConfig::frame_ids() const {
  std::vector<std::string> ids;
  for (const auto& f : frames) ids.push_back(f.id);
  return ids;
}

const FrameConfig& ExperimentConfig::frame(const std::string& id) const {
  for (const auto& f : frames) {
    if (f.id == id) return f;
  }
  throw Error(ErrorCode::ConfigError, "unknown frame id '" + id + "'");
}

std::vector<std::string> variant_names(const json& j) {
  std::vector<std::string> names;
  if (const json* v = find(j, "variants")) {
    if (!v->is_array()) config_error("variants", "expected an array");
    for (const auto& e : *v) names.push_back(string(e, "name", ""));
  }
  return names;
}

json apply_variant(const json& j, const std::string& name) {
  json out = j;
  out.erase("variants");
  if (const json* v = find(j, "variants")) {
    for (const auto& e : *v) {
      if (string(e, "name", "") == name) {
        out.merge_patch(e.value("patch", json::object()));
        return out;
      }
    }
  }
  config_error("variants", "no variant named '" + name + "'");
}

ExperimentConfig parse_experiment(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) config_error("<root>", "expected an object");
  try {
    ExperimentConfig cfg;
    cfg.base_dir = base_dir;
    if (const json* s = find(j, "seed")) {
      if (!s->is_number_integer() || s->get<std::int64_t>() < 0) {
        config_error("seed", "expected a non-negative integer");
      }
      cfg.seed = s->get<std::uint64_t>();
    }

    const json* demos = find(j, "demos");
    if (!demos) config_error("demos", "required");
    if (const json* p = find(*demos, "path")) {
      const std::filesystem::path path = p->get<std::string>();
      cfg.demo_path = path.is_absolute() ? path : base_dir / path;
    } else {
      cfg.demo_spec = demo_spec_of(*demos, cfg.seed);
      cfg.keypoint_jitter = number(*demos, "keypoint_jitter", 0.0);
    }
    const Index dout = integer(j, "output_dim", cfg.demo_path ? 3 : cfg.demo_spec.start.size());
    if (dout < 1) config_error("output_dim", "must be positive");
    cfg.spec = BlockSpec::time_input(dout);

    cfg.K = integer(j, "K", cfg.K);
    if (cfg.K < 1) config_error("K", "must be positive");
    if (const json* em = find(j, "em")) {
      cfg.em.reg = number(*em, "reg", cfg.em.reg);
      cfg.em.max_iter = static_cast<int>(integer(*em, "max_iter", cfg.em.max_iter));
      cfg.em.tol = number(*em, "tol", cfg.em.tol);
      const std::string init = string(*em, "init", "kmeans++");
      if (init == "time_bins") {
        cfg.em.init = TimeBinsInit{};
      } else if (init != "kmeans++") {
        config_error("em.init", "expected 'kmeans++' or 'time_bins'");
      }
    }
    if (std::holds_alternative<KMeansPlusPlusInit>(cfg.em.init)) cfg.em.init = KMeansPlusPlusInit{cfg.seed};

    const json* frames = find(j, "frames");
    if (!frames || !frames->is_array() || frames->empty()) config_error("frames", "expected a non-empty array");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < frames->size(); ++i) {
      const json& fj = (*frames)[i];
      const std::string key = "frames[" + std::to_string(i) + "]";
      FrameConfig f;
      f.id = string(fj, "id", "frame" + std::to_string(i + 1));
      if (!ids.insert(f.id).second) config_error(key + ".id", "duplicate id '" + f.id + "'");
      f.frame = frame_entry(fj, cfg.spec, key);
      f.train_frame = f.frame;
      f.model_of = string(fj, "model_of", "");
      if (const json* t = find(fj, "train")) {
        if (find(*t, "keypoint_time")) {
          f.placement = TrainPlacement::Keypoint;
          f.keypoint_time = number(*t, "keypoint_time", 0.0);
        } else if (find(*t, "decoy_distance")) {
          f.placement = TrainPlacement::Decoy;
          f.decoy_distance = number(*t, "decoy_distance", 0.0);
          if (!(f.decoy_distance > 0.0)) config_error(key + ".train.decoy_distance", "must be positive");
        } else {
          f.train_frame = frame_entry(*t, cfg.spec, key + ".train");
        }
      }
      cfg.frames.push_back(std::move(f));
    }
    for (const auto& f : cfg.frames) {
      if (!f.model_of.empty() && (!ids.contains(f.model_of) || !cfg.frame(f.model_of).model_of.empty())) {
        config_error("frames." + f.id + ".model_of", "must name a frame that trains its own model");
      }
    }
    if (const json* m = find(j, "models")) {
      const std::filesystem::path path = m->get<std::string>();
      cfg.models_path = path.is_absolute() ? path : base_dir / path;
    }

    const Index P = static_cast<Index>(cfg.frames.size());
    if (const json* c = find(j, "confidences")) {
      if (!c->is_array() || c->empty()) config_error("confidences", "expected an array");
      cfg.confidences = (*c)[0].is_array() ? matrix_of(*c, "confidences")
                                            : MatrixXd(vector_of(*c, "confidences").transpose());
      if (cfg.confidences->cols() != P) config_error("confidences", "one column per frame is required");
    }
    if (const json* g = find(j, "confidence_groups")) {
      if (!g->is_array()) config_error("confidence_groups", "expected an array");
      for (const auto& e : *g) {
        const VectorXd c = vector_of(e.value("c", json()), "confidence_groups.c");
        if (c.size() != P) config_error("confidence_groups.c", "one value per frame is required");
        cfg.confidence_groups.emplace_back(string(e, "name", "group"), std::vector<double>(c.data(), c.data() + c.size()));
      }
    }

    if (const json* o = find(j, "optimizer")) {
      OptimizerConfig& oc = cfg.optimizer;
      oc.H = integer(*o, "H", oc.H);
      oc.kappa = number(*o, "kappa", oc.kappa);
      if (const json* n = find(*o, "noise_std")) {
        oc.noise_std = n->is_number() ? VectorXd::Constant(1, n->get<double>()) : vector_of(*n, "optimizer.noise_std");
      }
      oc.total_rollouts = integer(*o, "total_rollouts", oc.total_rollouts);
      oc.eval_noise_free_every = integer(*o, "eval_noise_free_every", oc.eval_noise_free_every);
      oc.noise_decay = number(*o, "noise_decay", oc.noise_decay);
      oc.parallel = integer(*o, "parallel", oc.parallel);
      if (const json* n = find(*o, "gmm_noise_std")) {
        cfg.gmm_noise_std = n->is_number() ? VectorXd::Constant(1, n->get<double>())
                                           : vector_of(*n, "optimizer.gmm_noise_std");
      }
      if (const json* b = find(*o, "basis")) {
        const std::string kind = string(*b, "kind", "constant");
        if (kind == "rbf") {
          cfg.basis = BasisFamily::rbf(integer(*b, "count", 3), number(*b, "width", 0.0));
        } else if (kind != "constant") {
          config_error("optimizer.basis.kind", "expected 'constant' or 'rbf'");
        }
      }
    }
    cfg.optimizer.seed = cfg.seed;
    cfg.optimizer.validate();
    cfg.basis.validate();

    if (const json* m = find(j, "free_mask")) {
      if (!m->is_array()) config_error("free_mask", "expected an array of booleans");
      for (const auto& b : *m) {
        if (!b.is_boolean()) config_error("free_mask", "expected an array of booleans");
        cfg.free_mask.push_back(b.get<bool>());
      }
      const auto n = static_cast<Index>(cfg.free_mask.size());
      if (n != adjustment_size(dout) && n != P * adjustment_size(dout)) {
        config_error("free_mask", "expected 3 + D_O entries or one block per frame");
      }
    }

    if (const json* a = find(j, "arm")) {
      cfg.arm = arm_of(*a);
      if (const json* q = find(*a, "q0")) cfg.q0 = vector_of(*q, "arm.q0");
      if (const json* q = find(*a, "q_init")) cfg.q_init = vector_of(*q, "arm.q_init");
      cfg.damping = number(*a, "damping", cfg.damping);
    }
    cfg.arm.validate();
    if (cfg.arm.position_dim() != dout) config_error("arm", "position size differs from the output dimension");
    if (cfg.q_init.size() == 0) {
      cfg.q_init = cfg.arm.home.size() != 0 ? cfg.arm.home : VectorXd(VectorXd::Zero(cfg.arm.dof()));
    }
    if (cfg.q_init.size() != cfg.arm.dof()) config_error("arm.q_init", "one entry per joint is required");
    if (cfg.q0 && cfg.q0->size() != cfg.arm.dof()) config_error("arm.q0", "one entry per joint is required");

    cfg.cost = cost_of(find(j, "cost") ? j["cost"] : json::object(), cfg.arm.dof());
    cfg.cost.validate();

    if (const json* b = find(j, "baselines")) {
      if (!b->is_array()) config_error("baselines", "expected an array");
      for (const auto& e : *b) {
        NamedAdjustments n{string(e, "name", "baseline"), {}};
        for (Index f = 0; f < P; ++f) n.adjustments.push_back(FrameAdjustment::zero(dout));
        if (const json* adj = find(e, "adjustments")) {
          for (const auto& a : *adj) {
            const std::string id = string(a, "frame", "");
            bool found = false;
            for (Index f = 0; f < P; ++f) {
              if (cfg.frames[static_cast<std::size_t>(f)].id == id) {
                n.adjustments[static_cast<std::size_t>(f)] = adjustment_of(a, dout, "baselines." + n.name);
                found = true;
              }
            }
            if (!found) config_error("baselines." + n.name, "unknown frame '" + id + "'");
          }
        }
        cfg.baselines.push_back(std::move(n));
      }
    }

    if (const json* s = find(j, "selection")) {
      SelectionConfig sc;
      if (const json* c = find(*s, "candidates")) {
        for (const auto& id : *c) sc.candidates.push_back(id.get<std::string>());
      } else {
        sc.candidates = cfg.frame_ids();
      }
      for (const auto& id : sc.candidates) (void)cfg.frame(id);
      sc.max_frames = integer(*s, "max_frames", sc.max_frames);
      sc.runs_per_eval = integer(*s, "runs_per_eval", sc.runs_per_eval);
      cfg.selection = sc;
    }

    cfg.output_dir = string(j, "output_dir", cfg.output_dir.string());
    return cfg;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, e.what());
  }
}

ExperimentConfig load_experiment(const std::filesystem::path& file) {
  json j;
  try {
    j = read_json(file);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  return parse_experiment(j, file.parent_path());
}

std::vector<Demonstration> experiment_demos(const ExperimentConfig& cfg) {
  std::vector<Demonstration> demos;
  if (cfg.demo_path) {
    demos = load_demos(*cfg.demo_path);
  } else if (cfg.keypoint_jitter > 0.0) {
    demos = generate_varied_corpus(cfg.demo_spec, cfg.keypoint_jitter);
  } else {
    demos = generate_reaching(cfg.demo_spec);
  }
  for (const auto& d : demos) {
    if (d.dim() != cfg.spec.dim()) {
      throw Error(ErrorCode::DimensionMismatch, "demonstration has " + std::to_string(d.dim()) +
                                                    " columns, expected " + std::to_string(cfg.spec.dim()));
    }
  }
  return demos;
}

std::vector<std::vector<TaskFrame>> training_frames(const ExperimentConfig& cfg,
                                                    std::span<const Demonstration> demos) {
  std::vector<std::vector<TaskFrame>> out;
  for (std::size_t j = 0; j < cfg.frames.size(); ++j) {
    const FrameConfig& f = cfg.frames[j];
    if (!f.model_of.empty()) continue;
    switch (f.placement) {
      case TrainPlacement::Fixed:
        out.emplace_back(demos.size(), f.train_frame);
        break;
      case TrainPlacement::Keypoint:
        out.push_back(keypoint_frames(demos, cfg.spec, f.keypoint_time));
        break;
      case TrainPlacement::Decoy: {
        std::mt19937_64 rng(cfg.seed + 1000003ULL * (j + 1));
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<TaskFrame> frames;
        for (const auto& d : demos) {
          VectorXd dir(cfg.spec.output_size());
          for (Index i = 0; i < dir.size(); ++i) dir(i) = normal(rng);
          const VectorXd start = d.points.row(0).transpose()(cfg.spec.output_dims);
          frames.push_back(TaskFrame::translation(
              lift(start + f.decoy_distance * dir.normalized(), cfg.spec, f.id)));
        }
        out.push_back(std::move(frames));
        break;
      }
    }
  }
  return out;
}

std::vector<LocalModel> learn_models(const ExperimentConfig& cfg,
                                     std::span<const Demonstration> demos) {
  std::vector<std::string> ids;
  for (const auto& f : cfg.frames) {
    if (f.model_of.empty()) ids.push_back(f.id);
  }
  return fit_local_models(demos, training_frames(cfg, demos), cfg.K, cfg.spec, cfg.em, ids);
}

std::vector<LocalModel> models_for_frames(const ExperimentConfig& cfg,
                                          std::span<const LocalModel> trained,
                                          std::span<const std::string> ids) {
  std::vector<LocalModel> out;
  for (const auto& id : ids) {
    const FrameConfig& f = cfg.frame(id);
    const std::string source = f.model_of.empty() ? f.id : f.model_of;
    const auto it = std::find_if(trained.begin(), trained.end(),
                                 [&](const LocalModel& m) { return m.frame_id == source; });
    if (it == trained.end()) throw Error(ErrorCode::ConfigError, "no trained model for frame '" + source + "'");
    LocalModel m = *it;
    m.frame_id = id;
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<TaskFrame> frames_for(const ExperimentConfig& cfg, std::span<const std::string> ids) {
  std::vector<TaskFrame> out;
  for (const auto& id : ids) out.push_back(cfg.frame(id).frame);
  return out;
}

MatrixXd reproduction_inputs(std::span<const Demonstration> demos, const BlockSpec& spec) {
  if (demos.empty()) throw Error(ErrorCode::EmptyData, "no demonstrations");
  return demos.front().points(Eigen::all, spec.input_dims);
}

OptimizationProblem build_problem(const ExperimentConfig& cfg, std::span<const LocalModel> trained,
                                  std::span<const Demonstration> demos,
                                  std::span<const std::string> ids_in) {
  const std::vector<std::string> ids =
      ids_in.empty() ? cfg.frame_ids() : std::vector<std::string>(ids_in.begin(), ids_in.end());
  OptimizationProblem p;
  p.models = models_for_frames(cfg, trained, ids);
  p.frames = frames_for(cfg, ids);
  p.inputs = reproduction_inputs(demos, cfg.spec);
  p.dt = demos.front().dt;
  const Index P = static_cast<Index>(ids.size());
  if (cfg.free_mask.empty()) {
    p.free_mask = full_mask(P, cfg.output_dim());
  } else if (static_cast<Index>(cfg.free_mask.size()) == adjustment_size(cfg.output_dim())) {
    p.free_mask = repeat_mask(cfg.free_mask, P);
  } else {
    p.free_mask = cfg.free_mask;
  }
  p.cost = cfg.cost;
  p.arm = cfg.arm;
  p.damping = cfg.damping;
  p.basis = cfg.basis;
  if (cfg.confidences && ids_in.empty()) p.confidences = cfg.confidences;
  if (cfg.q0) {
    p.q0 = *cfg.q0;
  } else {
    const auto seq = reproduce(p.models, p.frames, p.inputs, p.confidences);
    p.q0 = inverse_kinematics(cfg.arm, seq.front().mean, cfg.q_init);
  }
  p.validate();
  return p;
}

SelectionTemplate build_selection_template(const ExperimentConfig& cfg,
                                           std::span<const LocalModel> trained,
                                           std::span<const Demonstration> demos) {
  const OptimizationProblem p = build_problem(cfg, trained, demos);
  SelectionTemplate t;
  t.inputs = p.inputs;
  t.dt = p.dt;
  t.frame_mask.assign(p.free_mask.begin(), p.free_mask.begin() + adjustment_size(cfg.output_dim()));
  t.cost = p.cost;
  t.arm = p.arm;
  t.q0 = p.q0;
  t.damping = p.damping;
  t.basis = p.basis;
  return t;
}

std::vector<Candidate> build_candidates(const ExperimentConfig& cfg,
                                        std::span<const LocalModel> trained) {
  if (!cfg.selection) throw Error(ErrorCode::ConfigError, "selection: required for frame selection");
  const auto& ids = cfg.selection->candidates;
  const auto models = models_for_frames(cfg, trained, ids);
  const auto frames = frames_for(cfg, ids);
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < ids.size(); ++i) out.push_back({models[i], frames[i]});
  return out;
}

std::vector<TaskFrame> apply_adjustments(const OptimizationProblem& problem,
                                         std::span<const FrameAdjustment> adjustments) {
  if (adjustments.size() != problem.frames.size()) {
    throw Error(ErrorCode::FrameCountMismatch, "one adjustment per frame is required");
  }
  std::vector<TaskFrame> out;
  for (std::size_t j = 0; j < adjustments.size(); ++j) {
    out.push_back(adjust_frame(problem.frames[j], problem.models[j].spec, adjustments[j]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

json to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const VectorXd& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

MatrixXd matrix_from_json(const json& j, const std::string& key) { return matrix_of(j, key); }
VectorXd vector_from_json(const json& j, const std::string& key) { return vector_of(j, key); }

json frame_to_json(const TaskFrame& frame) {
  if (frame.is_static()) return {{"A", to_json(frame.A())}, {"b", to_json(frame.b())}};
  json A = json::array(), b = json::array();
  for (Index t = 0; t < frame.steps(); ++t) {
    A.push_back(to_json(frame.A(t)));
    b.push_back(to_json(frame.b(t)));
  }
  return {{"A_t", A}, {"b_t", b}};
}

TaskFrame frame_from_json(const json& j, Index dim, const std::string& key) {
  if (!j.is_object()) config_error(key, "expected a frame object");
  auto check = [&](const MatrixXd& A, const VectorXd& b) {
    if (A.rows() != dim || A.cols() != dim || b.size() != dim) {
      config_error(key, "frame must be " + std::to_string(dim) + "-dimensional");
    }
  };
  if (const json* bt = find(j, "b_t")) {
    const json* At = find(j, "A_t");
    std::vector<MatrixXd> As;
    std::vector<VectorXd> bs;
    for (std::size_t t = 0; t < bt->size(); ++t) {
      bs.push_back(vector_of((*bt)[t], key + ".b_t"));
      As.push_back(At ? matrix_of((*At)[t], key + ".A_t") : MatrixXd(MatrixXd::Identity(dim, dim)));
      check(As.back(), bs.back());
    }
    if (At && At->size() != bt->size()) config_error(key, "A_t and b_t lengths differ");
    if (bs.empty()) config_error(key + ".b_t", "must not be empty");
    return TaskFrame(std::move(As), std::move(bs));
  }
  const MatrixXd A = find(j, "A") ? matrix_of(j["A"], key + ".A") : MatrixXd(MatrixXd::Identity(dim, dim));
  const VectorXd b = find(j, "b") ? vector_of(j["b"], key + ".b") : VectorXd(VectorXd::Zero(dim));
  check(A, b);
  return TaskFrame(A, b);
}

json models_to_json(std::span<const LocalModel> models) {
  json out = json::array();
  for (const auto& m : models) {
    json comps = json::array();
    for (const auto& c : m.gmm.components) {
      comps.push_back({{"mean", to_json(c.mean)}, {"covariance", to_json(c.covariance)}});
    }
    out.push_back({{"frame_id", m.frame_id},
                   {"input_dims", m.spec.input_dims},
                   {"output_dims", m.spec.output_dims},
                   {"weights", to_json(m.gmm.weights)},
                   {"components", comps}});
  }
  return json{{"models", out}};
}

std::vector<LocalModel> models_from_json(const json& j) {
  try {
    std::vector<LocalModel> out;
    for (const auto& m : j.at("models")) {
      LocalModel lm;
      lm.frame_id = m.at("frame_id").get<std::string>();
      lm.spec = BlockSpec(m.at("input_dims").get<std::vector<Index>>(),
                          m.at("output_dims").get<std::vector<Index>>());
      std::vector<Gaussian> comps;
      for (const auto& c : m.at("components")) {
        comps.emplace_back(vector_of(c.at("mean"), "mean"), matrix_of(c.at("covariance"), "covariance"));
      }
      lm.gmm = GMM(vector_of(m.at("weights"), "weights"), std::move(comps));
      out.push_back(std::move(lm));
    }
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("models: ") + e.what());
  }
}

json selection_to_json(const SelectionReport& report) {
  json rounds = json::array();
  for (std::size_t r = 0; r < report.rounds.size(); ++r) {
    const auto& round = report.rounds[r];
    json evals = json::array();
    for (const auto& e : round.evaluations) {
      evals.push_back({{"candidate_set", e.candidate_set}, {"final_cost", e.final_cost}, {"run_costs", e.run_costs}});
    }
    rounds.push_back({{"round", r + 1}, {"evaluations", evals}, {"winner", round.winner}, {"rationale", round.rationale}});
  }
  return {{"chosen", report.chosen}, {"rounds", rounds}};
}

void write_json(const json& j, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + file.string());
  out << j.dump(2) << '\n';
}

json read_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + file.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, file.string() + ": " + e.what());
  }
}

namespace {

void put(std::ofstream& out, double v, bool first = false) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  if (!first) out << ',';
  out << buf;
}

std::ofstream open_csv(const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + file.string());
  return out;
}

}  // namespace

void write_trajectory_csv(const std::filesystem::path& file, const MatrixXd& inputs,
                          std::span<const Gaussian> seq) {
  if (static_cast<Index>(seq.size()) != inputs.rows()) throw Error(ErrorCode::LengthMismatch, "trajectory length");
  auto out = open_csv(file);
  out << "t";
  const Index d = seq.empty() ? 0 : seq.front().dim();
  for (Index i = 1; i <= d; ++i) out << ",x" << i;
  out << ",cov_trace\n";
  for (std::size_t t = 0; t < seq.size(); ++t) {
    put(out, inputs(static_cast<Index>(t), 0), true);
    for (Index i = 0; i < d; ++i) put(out, seq[t].mean(i));
    put(out, seq[t].covariance.trace());
    out << '\n';
  }
}

void write_joint_csv(const std::filesystem::path& file, const MatrixXd& inputs,
                     const MatrixXd& q_seq, const MatrixXd& positions) {
  auto out = open_csv(file);
  out << "t";
  for (Index i = 1; i <= q_seq.cols(); ++i) out << ",q" << i;
  const char* axes[] = {"x", "y", "z"};
  for (Index i = 0; i < positions.cols() && i < 3; ++i) out << ',' << axes[i];
  out << '\n';
  for (Index t = 0; t < q_seq.rows(); ++t) {
    put(out, inputs(t, 0), true);
    for (Index i = 0; i < q_seq.cols(); ++i) put(out, q_seq(t, i));
    for (Index i = 0; i < positions.cols(); ++i) put(out, positions(t, i));
    out << '\n';
  }
}

void write_cost_curve_csv(const std::filesystem::path& file, std::span<const CostCurveRow> rows) {
  auto out = open_csv(file);
  out << "update_index,noise_free_cost,batch_mean,batch_min\n";
  for (const auto& r : rows) {
    out << r.update;
    put(out, r.noise_free_cost);
    put(out, r.batch_mean);
    put(out, r.batch_min);
    out << '\n';
  }
}

}  // namespace tpmove

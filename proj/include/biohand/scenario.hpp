#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "biohand/controller.hpp"
#include "biohand/hand_model.hpp"
#include "biohand/reference.hpp"
#include "biohand/scene.hpp"
#include "biohand/tasks.hpp"

namespace biohand {

/// One controller block of a scenario file. Scalars broadcast to every DOF.
struct ControllerSpec {
  ControllerType type = ControllerType::Adaptive;
  // adaptive
  double pi = 10.0;
  nlohmann::json q_k = 1.0, q_d = 0.1, q_v = 1.0;
  nlohmann::json ks_init = 1.0, kd_init = 0.1;
  double gain_decay = 0.0;
  // fixed (defaults to the adaptive initial gains) / position (defaults to the model's servo gains)
  std::optional<nlohmann::json> ks, kd;
};

struct BasisSpec {
  int n_basis = 10;
  double phase_tau = 1.0;
  std::optional<double> span;  // time covered by the centers; defaults to the scenario duration
  std::optional<std::vector<double>> centers, widths;
};

struct ReferenceSpec {
  std::string kind = "scripted";  // scripted | file | live
  TaskScript script;
  std::string path;               // file: trajectory CSV, relative to the scenario file
};

/// Task outcome predicate. Thresholds are scenario data.
struct SuccessSpec {
  std::string kind = "none";      // grasp | articulation | touch | none
  std::string object;
  double window_start = 0.0;      // grasp hold / touch evaluation window start, s
  double max_drop = 0.005;        // grasp: object displacement over the window, m
  int min_contacts = 2;           // grasp: fingertips in contact throughout the window
  double target = 0.0;            // articulation: coordinate to exceed
  double min_contact_fraction = 0.9;  // touch: share of window ticks with contact
  double force_ceiling = 5.0;     // touch: mean contact force ceiling, N
};

struct Perturbation {
  double position = 0.005;  // uniform +- per axis, m
  double angle = 0.05;      // uniform +- about world z, rad
};

struct Scenario {
  std::string name;
  HandModel model;
  Scene scene;
  ReferenceSpec reference;
  std::map<ControllerType, ControllerSpec> controllers;
  ControllerType default_controller = ControllerType::Adaptive;
  BasisSpec basis;
  SuccessSpec success;
  Perturbation perturbation;
  double duration = 1.0;
  double sim_dt = 1e-3;
  double ctrl_dt = 1e-2;
  std::uint64_t seed = 0;
  Vec initial_q;            // defaults to the clamped zero pose
  std::string base_dir = ".";

  /// Control ticks per run and simulation substeps per tick.
  [[nodiscard]] long ticks() const { return static_cast<long>(std::floor(duration / ctrl_dt + 1e-9)); }
  [[nodiscard]] int substeps() const { return static_cast<int>(std::llround(ctrl_dt / sim_dt)); }

  void validate() const {
    if (!(duration >= 0.0)) throw InvalidArgument("scenario " + name + ": duration must be >= 0");
    if (!(sim_dt > 0.0) || !(ctrl_dt > 0.0)) throw InvalidArgument("scenario " + name + ": time steps must be > 0");
    const double ratio = ctrl_dt / sim_dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1.0)
      throw InvalidArgument("scenario " + name + ": ctrl_dt must be an integer multiple of sim_dt");
    require_size(initial_q, model.dofs(), "scenario initial_q");
  }
};

// ---------------------------------------------------------------------------

inline ControllerSpec controller_spec_from_json(ControllerType type, const nlohmann::json& j) {
  ControllerSpec c;
  c.type = type;
  c.pi = j.value("pi", c.pi);
  if (j.contains("q_k")) c.q_k = j["q_k"];
  if (j.contains("q_d")) c.q_d = j["q_d"];
  if (j.contains("q_v")) c.q_v = j["q_v"];
  if (j.contains("ks_init")) c.ks_init = j["ks_init"];
  if (j.contains("kd_init")) c.kd_init = j["kd_init"];
  c.gain_decay = j.value("gain_decay", c.gain_decay);
  if (j.contains("ks")) c.ks = j["ks"];
  if (j.contains("kd")) c.kd = j["kd"];
  return c;
}

inline nlohmann::json controller_spec_to_json(const ControllerSpec& c) {
  nlohmann::json j = {{"type", std::string(to_string(c.type))}};
  if (c.type == ControllerType::Adaptive) {
    j["pi"] = c.pi;
    j["q_k"] = c.q_k;
    j["q_d"] = c.q_d;
    j["q_v"] = c.q_v;
    j["ks_init"] = c.ks_init;
    j["kd_init"] = c.kd_init;
    j["gain_decay"] = c.gain_decay;
  }
  if (c.ks) j["ks"] = *c.ks;
  if (c.kd) j["kd"] = *c.kd;
  return j;
}

inline GaussianBasis make_basis(const BasisSpec& spec, double duration) {
  if (spec.centers || spec.widths) {
    if (!spec.centers || !spec.widths) throw FormatError("basis: centers and widths must be given together");
    Vec c = Eigen::Map<const Vec>(spec.centers->data(), static_cast<Eigen::Index>(spec.centers->size()));
    Vec h = Eigen::Map<const Vec>(spec.widths->data(), static_cast<Eigen::Index>(spec.widths->size()));
    return GaussianBasis(std::move(c), std::move(h));
  }
  const double span = spec.span.value_or(duration > 0.0 ? duration : 1.0);
  return GaussianBasis::time_uniform(spec.n_basis, span, spec.phase_tau);
}

/// Per-DOF gain from a number, an array of length N_r, or an object
/// {"default": x, "<joint name>": y, ...}.
inline Vec gain_vector(const nlohmann::json& j, const HandModel& model, const char* what) {
  if (!j.is_object()) return detail::vec_from(j, model.dofs(), what);
  if (!j.contains("default")) throw FormatError(std::string(what) + ": per-joint object needs a 'default'");
  Vec v = Vec::Constant(model.dofs(), j["default"].get<double>());
  for (const auto& [name, value] : j.items())
    if (name != "default") v[model.joint_index(name)] = value.get<double>();
  return v;
}

/// Build the runnable controller for `type` from the scenario's blocks.
inline Controller make_controller(const Scenario& sc, ControllerType type) {
  auto it = sc.controllers.find(type);
  ControllerSpec spec = it != sc.controllers.end() ? it->second : ControllerSpec{};
  spec.type = type;
  auto adaptive_spec = sc.controllers.find(ControllerType::Adaptive);
  const ControllerSpec base = adaptive_spec != sc.controllers.end() ? adaptive_spec->second : ControllerSpec{};
  switch (type) {
    case ControllerType::Adaptive: {
      AdaptiveConfig cfg;
      cfg.basis = make_basis(sc.basis, sc.duration);
      cfg.phase_tau = sc.basis.phase_tau;
      cfg.gains.q_k = gain_vector(spec.q_k, sc.model, "q_k");
      cfg.gains.q_d = gain_vector(spec.q_d, sc.model, "q_d");
      cfg.gains.q_v = gain_vector(spec.q_v, sc.model, "q_v");
      cfg.gains.pi = spec.pi;
      cfg.tau_max = sc.model.tau_max();
      cfg.ks_init = gain_vector(spec.ks_init, sc.model, "ks_init");
      cfg.kd_init = gain_vector(spec.kd_init, sc.model, "kd_init");
      cfg.gain_decay = spec.gain_decay;
      return Controller::adaptive(std::move(cfg));
    }
    case ControllerType::Fixed: {
      Vec ks = gain_vector(spec.ks ? *spec.ks : base.ks_init, sc.model, "ks");
      Vec kd = gain_vector(spec.kd ? *spec.kd : base.kd_init, sc.model, "kd");
      return Controller::fixed(std::move(ks), std::move(kd), sc.model.tau_max());
    }
    case ControllerType::Position: {
      PositionGains g = sc.model.position_mode_gains();
      if (spec.ks) g.ks = gain_vector(*spec.ks, sc.model, "ks");
      if (spec.kd) g.kd = gain_vector(*spec.kd, sc.model, "kd");
      return Controller::position(std::move(g), sc.model.tau_max());
    }
  }
  throw InvalidArgument("unknown controller type");
}

inline HandModel resolve_model(const std::string& ref, const std::string& base_dir) {
  if (ref == "builtin:hand24") return default_hand24();
  if (ref == "builtin:single_joint") return single_joint_model();
  std::filesystem::path p(ref);
  if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
  return load_model(p.string());
}

inline Scenario scenario_from_json(const nlohmann::json& j, const std::string& base_dir = ".") {
  try {
    Scenario sc;
    sc.base_dir = base_dir;
    sc.name = j.at("name").get<std::string>();
    sc.model = resolve_model(j.value("hand_model", std::string("builtin:hand24")), base_dir);
    sc.duration = j.at("duration").get<double>();
    sc.sim_dt = j.value("sim_dt", sc.sim_dt);
    sc.ctrl_dt = j.value("ctrl_dt", sc.ctrl_dt);
    sc.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("perturbation")) {
      sc.perturbation.position = j["perturbation"].value("position", sc.perturbation.position);
      sc.perturbation.angle = j["perturbation"].value("angle", sc.perturbation.angle);
    }
    sc.scene.gravity = sc.model.gravity();
    for (const auto& oj : j.value("scene", nlohmann::json::array())) sc.scene.objects.push_back(object_from_json(oj));

    if (j.contains("basis")) {
      const auto& b = j["basis"];
      sc.basis.n_basis = b.value("n_basis", sc.basis.n_basis);
      sc.basis.phase_tau = b.value("phase_tau", sc.basis.phase_tau);
      if (b.contains("span")) sc.basis.span = b["span"].get<double>();
      if (b.contains("centers")) sc.basis.centers = b["centers"].get<std::vector<double>>();
      if (b.contains("widths")) sc.basis.widths = b["widths"].get<std::vector<double>>();
    }

    for (const auto& [key, cj] : j.at("controllers").items()) {
      const ControllerType t = parse_controller_type(key);
      sc.controllers[t] = controller_spec_from_json(t, cj);
    }
    sc.default_controller = parse_controller_type(j.value("controller", std::string("adaptive")));

    const auto& r = j.at("reference");
    sc.reference.kind = r.at("kind").get<std::string>();
    if (sc.reference.kind == "scripted") {
      sc.reference.script = task_script_from_json(r);
    } else if (sc.reference.kind == "file") {
      sc.reference.path = r.at("path").get<std::string>();
    } else if (sc.reference.kind != "live") {
      throw FormatError("reference kind must be scripted, file or live");
    }

    if (j.contains("success")) {
      const auto& s = j["success"];
      sc.success.kind = s.value("kind", sc.success.kind);
      sc.success.object = s.value("object", std::string());
      sc.success.window_start = s.value("window_start", sc.success.window_start);
      sc.success.max_drop = s.value("max_drop", sc.success.max_drop);
      sc.success.min_contacts = s.value("min_contacts", sc.success.min_contacts);
      sc.success.target = s.value("target", sc.success.target);
      sc.success.min_contact_fraction = s.value("min_contact_fraction", sc.success.min_contact_fraction);
      sc.success.force_ceiling = s.value("force_ceiling", sc.success.force_ceiling);
    }
    sc.initial_q = j.contains("initial_q") ? detail::vec_from(j["initial_q"], sc.model.dofs(), "initial_q")
                                           : sc.model.clamp(Vec::Zero(sc.model.dofs()));
    sc.validate();
    return sc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("scenario: " + std::string(e.what()));
  } catch (const InvalidArgument& e) {
    throw FormatError("scenario: " + std::string(e.what()));
  }
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open scenario " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("scenario " + path + ": " + e.what());
  }
  return scenario_from_json(j, std::filesystem::path(path).parent_path().string());
}

/// Seeded initial-pose offset applied to every object: a uniform translation
/// and a rotation about world z through the object origin.
inline Scene perturbed_scene(const Scene& scene, const Perturbation& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Scene out = scene;
  for (SceneObject& o : out.objects) {
    const Vec3 dp(p.position * unit(rng), p.position * unit(rng), p.position * unit(rng));
    const double da = p.angle * unit(rng);
    const Mat3 r = Eigen::AngleAxisd(da, Vec3::UnitZ()).toRotationMatrix();
    o.axis_point = r * (o.axis_point - o.position) + o.position + dp;
    o.axis = r * o.axis;
    o.orientation = r * o.orientation;
    o.position += dp;
  }
  return out;
}

inline ReferencePtr make_reference(const Scenario& sc, const Scene& scene) {
  if (sc.reference.kind == "scripted") return scripted_task_reference(sc.model, scene, sc.reference.script);
  if (sc.reference.kind == "file") {
    std::filesystem::path p(sc.reference.path);
    if (p.is_relative()) p = std::filesystem::path(sc.base_dir) / p;
    return std::make_shared<SampledReference>(load_trajectory(p.string(), sc.model).samples);
  }
  return std::make_shared<LiveReference>(sc.model, sc.initial_q);
}

}  // namespace biohand

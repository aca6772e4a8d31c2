#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <utility>

#include "biohand/basis.hpp"
#include "biohand/state.hpp"

namespace biohand {

using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

/// Joint error against the reference plus the sliding error eps = e_dot + pi * e.
struct TrackingError {
  Vec e;
  Vec e_dot;
  Vec eps;
};

inline TrackingError tracking_error(const JointState& state, const ReferenceSample& ref, double pi) {
  const auto n = state.q.size();
  require_size(state.q_dot, n, "tracking_error: q_dot");
  require_size(ref.q_d, n, "tracking_error: q_d");
  TrackingError err;
  err.e = state.q - ref.q_d;
  err.e_dot = state.q_dot;  // desired velocity is zero
  err.eps = err.e_dot + pi * err.e;
  return err;
}

/// Stiffness, damping and feedforward parameters, one row per DOF and one
/// column per basis kernel.
struct AdaptiveParams {
  RowMat theta_k;
  RowMat theta_d;
  RowMat theta_v;

  /// Rows set so the initial profiles are Ks = ks_init, Kd = kd_init, v = 0
  /// regardless of the basis activation.
  static AdaptiveParams initial(Eigen::Index dofs, Eigen::Index kernels, double ks_init, double kd_init) {
    return initial(kernels, Vec::Constant(dofs, ks_init), Vec::Constant(dofs, kd_init));
  }

  /// Per-DOF initial gains.
  static AdaptiveParams initial(Eigen::Index kernels, const Vec& ks_init, const Vec& kd_init) {
    require_size(kd_init, ks_init.size(), "AdaptiveParams: kd_init");
    const RowMat ones = RowMat::Ones(1, kernels);
    return {ks_init * ones, kd_init * ones, RowMat::Zero(ks_init.size(), kernels)};
  }

  [[nodiscard]] Eigen::Index dofs() const { return theta_k.rows(); }
  [[nodiscard]] Eigen::Index kernels() const { return theta_k.cols(); }

  bool operator==(const AdaptiveParams& o) const {
    return theta_k == o.theta_k && theta_d == o.theta_d && theta_v == o.theta_v;
  }
};

/// Per-DOF learning rates and the sliding-error blend.
struct AdaptationGains {
  Vec q_k;
  Vec q_d;
  Vec q_v;
  double pi = 10.0;

  static AdaptationGains uniform(Eigen::Index dofs, double qk, double qd, double qv, double pi) {
    return {Vec::Constant(dofs, qk), Vec::Constant(dofs, qd), Vec::Constant(dofs, qv), pi};
  }

  void validate(Eigen::Index dofs) const {
    require_size(q_k, dofs, "AdaptationGains.q_k");
    require_size(q_d, dofs, "AdaptationGains.q_d");
    require_size(q_v, dofs, "AdaptationGains.q_v");
    if (!((q_k.array() > 0).all() && (q_d.array() > 0).all() && (q_v.array() > 0).all()))
      throw InvalidArgument("AdaptationGains: learning rates must be > 0");
    if (!(pi > 0.0)) throw InvalidArgument("AdaptationGains: pi must be > 0");
  }
};

struct CompliantProfiles {
  Vec ks;
  Vec kd;
  Vec v;
};

struct TorqueCommand {
  Vec tau;
  Mask clamped;
};

/// Ks = max(0, theta_k g), Kd = max(0, theta_d g), v = theta_v g.
/// Only the reconstructed gains are clamped; theta is left as adapted.
inline CompliantProfiles compliant_profiles(const AdaptiveParams& params, const Vec& g) {
  if (params.theta_k.cols() != g.size() || params.theta_d.cols() != g.size() ||
      params.theta_v.cols() != g.size() || params.theta_d.rows() != params.theta_k.rows() ||
      params.theta_v.rows() != params.theta_k.rows())
    throw InvalidArgument("compliant_profiles: parameter/basis shape mismatch");
  CompliantProfiles p;
  p.ks = (params.theta_k * g).cwiseMax(0.0);
  p.kd = (params.theta_d * g).cwiseMax(0.0);
  p.v = params.theta_v * g;
  return p;
}

/// tau = -(Ks e + Kd e_dot) - v, saturated to +-tau_max.
inline TorqueCommand compute_torque(const TrackingError& err, const Vec& ks, const Vec& kd, const Vec& v,
                                    const Vec& tau_max) {
  const auto n = err.e.size();
  require_size(err.e_dot, n, "compute_torque: e_dot");
  require_size(ks, n, "compute_torque: Ks");
  require_size(kd, n, "compute_torque: Kd");
  require_size(v, n, "compute_torque: v");
  require_size(tau_max, n, "compute_torque: tau_max");
  const Vec raw = -(ks.cwiseProduct(err.e) + kd.cwiseProduct(err.e_dot)) - v;
  TorqueCommand cmd;
  cmd.tau = raw.cwiseMax(-tau_max).cwiseMin(tau_max);
  cmd.clamped = raw.array().abs() > tau_max.array();
  return cmd;
}

/// One explicit-Euler step of the adaptation laws, per DOF row n:
///   theta_k[n] += q_k[n] eps_n e_n     g dt
///   theta_d[n] += q_d[n] eps_n e_dot_n g dt
///   theta_v[n] += q_v[n] eps_n         g dt
/// A positive `decay` adds -decay * theta to each rate (off by default).
inline AdaptiveParams update_params(AdaptiveParams params, const AdaptationGains& gains, const TrackingError& err,
                                    const Vec& g, double dt, double decay = 0.0) {
  if (!(dt > 0.0)) throw InvalidArgument("update_params: dt must be > 0");
  const auto n = params.dofs();
  gains.validate(n);
  require_size(err.e, n, "update_params: e");
  require_size(err.e_dot, n, "update_params: e_dot");
  require_size(err.eps, n, "update_params: eps");
  if (g.size() != params.kernels() || params.theta_d.rows() != n || params.theta_v.rows() != n ||
      params.theta_d.cols() != g.size() || params.theta_v.cols() != g.size())
    throw InvalidArgument("update_params: parameter/basis shape mismatch");

  const Eigen::RowVectorXd gt = g.transpose() * dt;
  const Vec rate_k = gains.q_k.cwiseProduct(err.eps).cwiseProduct(err.e);
  const Vec rate_d = gains.q_d.cwiseProduct(err.eps).cwiseProduct(err.e_dot);
  const Vec rate_v = gains.q_v.cwiseProduct(err.eps);
  if (decay > 0.0) {
    params.theta_k -= (decay * dt) * params.theta_k;
    params.theta_d -= (decay * dt) * params.theta_d;
    params.theta_v -= (decay * dt) * params.theta_v;
  }
  params.theta_k.noalias() += rate_k * gt;
  params.theta_d.noalias() += rate_d * gt;
  params.theta_v.noalias() += rate_v * gt;

  if (!params.theta_k.allFinite() || !params.theta_d.allFinite() || !params.theta_v.allFinite())
    throw ControllerFault("update_params: adaptation produced a non-finite parameter");
  return params;
}

/// Half the inertia-weighted squared sliding error. Reporting only.
inline double diagnostic_tracking_cost(const TrackingError& err, const Vec& inertia) {
  require_size(inertia, err.eps.size(), "diagnostic_tracking_cost: inertia");
  return 0.5 * (inertia.array() * err.eps.array().square()).sum();
}

inline TorqueCommand fixed_gain_step(const JointState& state, const ReferenceSample& ref, const Vec& ks0,
                                     const Vec& kd0, const Vec& tau_max) {
  const TrackingError err = tracking_error(state, ref, 0.0);
  return compute_torque(err, ks0, kd0, Vec::Zero(err.e.size()), tau_max);
}

/// Stiff PD servo standing in for a simulator's position-control mode.
struct PositionGains {
  Vec ks;
  Vec kd;
};

inline TorqueCommand position_mode_step(const JointState& state, const ReferenceSample& ref,
                                        const PositionGains& gains, const Vec& tau_max) {
  return fixed_gain_step(state, ref, gains.ks, gains.kd, tau_max);
}

// ---------------------------------------------------------------------------
// Online adaptive controller

struct AdaptiveConfig {
  GaussianBasis basis = GaussianBasis::time_uniform(10, 10.0);
  AdaptationGains gains;
  Vec tau_max;
  double phase_tau = 1.0;
  Vec ks_init;  // per DOF; empty means 1.0 everywhere
  Vec kd_init;  // per DOF; empty means 0.1 everywhere
  double gain_decay = 0.0;
};

struct AdaptiveState {
  PhaseState phase;
  AdaptiveParams params;

  static AdaptiveState initial(const AdaptiveConfig& cfg) {
    const auto n = cfg.tau_max.size();
    const Vec ks = cfg.ks_init.size() ? cfg.ks_init : Vec::Constant(n, 1.0);
    const Vec kd = cfg.kd_init.size() ? cfg.kd_init : Vec::Constant(n, 0.1);
    require_size(ks, n, "AdaptiveConfig: ks_init");
    require_size(kd, n, "AdaptiveConfig: kd_init");
    return {PhaseState{cfg.basis.s0()}, AdaptiveParams::initial(cfg.basis.size(), ks, kd)};
  }
};

struct AdaptiveStepResult {
  TorqueCommand command;
  AdaptiveState state;
  TrackingError error;
  CompliantProfiles profiles;
  Vec g;
};

/// One control tick: advance phase, evaluate basis, measure error, adapt
/// parameters, rebuild profiles, emit torque.
inline AdaptiveStepResult adaptive_step(const AdaptiveConfig& cfg, const AdaptiveState& state,
                                        const JointState& joints, const ReferenceSample& ref, double dt) {
  AdaptiveStepResult out;
  out.state.phase = phase_step(state.phase, dt, cfg.phase_tau);
  out.g = cfg.basis.eval(out.state.phase.s);
  out.error = tracking_error(joints, ref, cfg.gains.pi);
  out.state.params = update_params(state.params, cfg.gains, out.error, out.g, dt, cfg.gain_decay);
  out.profiles = compliant_profiles(out.state.params, out.g);
  out.command = compute_torque(out.error, out.profiles.ks, out.profiles.kd, out.profiles.v, cfg.tau_max);
  return out;
}

// ---------------------------------------------------------------------------
// Uniform front for the harness: one of the three control strategies.

enum class ControllerType { Adaptive, Fixed, Position };

inline std::string_view to_string(ControllerType t) {
  switch (t) {
    case ControllerType::Adaptive: return "adaptive";
    case ControllerType::Fixed: return "fixed";
    case ControllerType::Position: return "position";
  }
  return "?";
}

inline ControllerType parse_controller_type(std::string_view s) {
  if (s == "adaptive") return ControllerType::Adaptive;
  if (s == "fixed") return ControllerType::Fixed;
  if (s == "position") return ControllerType::Position;
  throw InvalidArgument("unknown controller type '" + std::string(s) + "'");
}

struct ControlOutput {
  TorqueCommand command;
  TrackingError error;
  CompliantProfiles profiles;
};

class Controller {
 public:
  static Controller adaptive(AdaptiveConfig cfg) {
    Controller c(ControllerType::Adaptive);
    cfg.gains.validate(cfg.tau_max.size());
    c.state_ = AdaptiveState::initial(cfg);
    c.adaptive_ = std::move(cfg);
    return c;
  }

  static Controller fixed(Vec ks, Vec kd, Vec tau_max) {
    return constant_gain(ControllerType::Fixed, std::move(ks), std::move(kd), std::move(tau_max));
  }

  static Controller position(PositionGains gains, Vec tau_max) {
    return constant_gain(ControllerType::Position, std::move(gains.ks), std::move(gains.kd), std::move(tau_max));
  }

  [[nodiscard]] ControllerType type() const { return type_; }
  [[nodiscard]] const AdaptiveState& adaptive_state() const { return state_; }
  [[nodiscard]] const AdaptiveConfig& adaptive_config() const { return adaptive_; }

  ControlOutput step(const JointState& joints, const ReferenceSample& ref, double dt) {
    ControlOutput out;
    if (type_ == ControllerType::Adaptive) {
      AdaptiveStepResult r = adaptive_step(adaptive_, state_, joints, ref, dt);
      state_ = std::move(r.state);
      out.command = std::move(r.command);
      out.error = std::move(r.error);
      out.profiles = std::move(r.profiles);
      return out;
    }
    out.error = tracking_error(joints, ref, 0.0);
    out.command = compute_torque(out.error, ks_, kd_, Vec::Zero(ks_.size()), tau_max_);
    out.profiles = {ks_, kd_, Vec::Zero(ks_.size())};
    return out;
  }

  void reset() {
    if (type_ == ControllerType::Adaptive) state_ = AdaptiveState::initial(adaptive_);
  }

 private:
  explicit Controller(ControllerType t) : type_(t) {}

  static Controller constant_gain(ControllerType t, Vec ks, Vec kd, Vec tau_max) {
    require_size(ks, tau_max.size(), "Controller: Ks");
    require_size(kd, tau_max.size(), "Controller: Kd");
    Controller c(t);
    c.ks_ = std::move(ks);
    c.kd_ = std::move(kd);
    c.tau_max_ = std::move(tau_max);
    return c;
  }

  ControllerType type_;
  AdaptiveConfig adaptive_;
  AdaptiveState state_;
  Vec ks_, kd_, tau_max_;
};

}  // namespace biohand

#pragma once

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biohand/controller.hpp"
#include "biohand/state.hpp"

namespace biohand {

/// One revolute joint. Its frame sits at `origin` in the parent joint's frame,
/// is pre-rotated by the fixed roll/pitch/yaw `rpy`, then rotates by q about `axis`.
struct JointSpec {
  std::string name;
  int parent = -1;  // -1: attached to the hand base
  Vec3 origin = Vec3::Zero();
  Vec3 rpy = Vec3::Zero();
  Vec3 axis = Vec3::UnitY();
  double limit_lo = -std::numbers::pi;
  double limit_hi = std::numbers::pi;
  double inertia = 5e-3;
  double viscous_damping = 0.02;
  double tau_max = 5.0;
};

/// Rigid segment carried by the joint of the same index, extending along the
/// joint frame's +x. A positive fingertip radius makes the segment end a fingertip.
struct LinkSpec {
  double length = 0.0;
  double fingertip_radius = 0.0;
  double mass = 0.0;
  std::string tip_name;
};

struct Fingertip {
  std::string name;
  int joint = -1;
  double radius = 0.0;
};

struct Frames {
  std::vector<Mat3> rotation;  // world orientation of each joint frame (after its own rotation)
  std::vector<Vec3> origin;    // world position of each joint
  std::vector<Vec3> link_end;  // world position of each link's far end
};

class HandModel {
 public:
  HandModel() = default;

  HandModel(std::vector<JointSpec> joints, std::vector<LinkSpec> links, Vec3 gravity, PositionGains position_gains)
      : joints_(std::move(joints)),
        links_(std::move(links)),
        gravity_(std::move(gravity)),
        position_gains_(std::move(position_gains)) {
    build();
  }

  [[nodiscard]] int dofs() const { return static_cast<int>(joints_.size()); }
  [[nodiscard]] const std::vector<JointSpec>& joints() const { return joints_; }
  [[nodiscard]] const std::vector<LinkSpec>& links() const { return links_; }
  [[nodiscard]] const std::vector<Fingertip>& fingertips() const { return tips_; }
  [[nodiscard]] const Vec3& gravity() const { return gravity_; }
  [[nodiscard]] const PositionGains& position_mode_gains() const { return position_gains_; }
  [[nodiscard]] const Vec& limit_lo() const { return lo_; }
  [[nodiscard]] const Vec& limit_hi() const { return hi_; }
  [[nodiscard]] const Vec& inertia() const { return inertia_; }
  [[nodiscard]] const Vec& viscous_damping() const { return damping_; }
  [[nodiscard]] const Vec& tau_max() const { return tau_max_; }

  /// Joints whose motion moves joint i (i itself included), base first.
  [[nodiscard]] const std::vector<int>& chain(int joint) const { return chains_.at(joint); }

  [[nodiscard]] int fingertip_index(const std::string& name) const {
    for (std::size_t i = 0; i < tips_.size(); ++i)
      if (tips_[i].name == name) return static_cast<int>(i);
    throw InvalidArgument("unknown fingertip '" + name + "'");
  }

  [[nodiscard]] int joint_index(const std::string& name) const {
    for (std::size_t i = 0; i < joints_.size(); ++i)
      if (joints_[i].name == name) return static_cast<int>(i);
    throw InvalidArgument("unknown joint '" + name + "'");
  }

  [[nodiscard]] Vec clamp(const Vec& q) const {
    require_size(q, dofs(), "HandModel::clamp");
    return q.cwiseMax(lo_).cwiseMin(hi_);
  }

  [[nodiscard]] const std::vector<int>& topological_order() const { return order_; }

 private:
  void build() {
    const int n = dofs();
    if (n < 1) throw InvalidArgument("HandModel: need at least one joint");
    if (static_cast<int>(links_.size()) != n) throw InvalidArgument("HandModel: one link per joint required");
    lo_.resize(n);
    hi_.resize(n);
    inertia_.resize(n);
    damping_.resize(n);
    tau_max_.resize(n);
    for (int i = 0; i < n; ++i) {
      const auto& j = joints_[i];
      if (j.parent < -1 || j.parent >= n || j.parent == i) throw InvalidArgument("HandModel: bad parent for " + j.name);
      if (!(j.limit_lo < j.limit_hi)) throw InvalidArgument("HandModel: limit_lo must be < limit_hi for " + j.name);
      if (!(j.inertia > 0.0)) throw InvalidArgument("HandModel: inertia must be > 0 for " + j.name);
      if (!(j.tau_max > 0.0)) throw InvalidArgument("HandModel: tau_max must be > 0 for " + j.name);
      if (!(j.viscous_damping >= 0.0)) throw InvalidArgument("HandModel: damping must be >= 0 for " + j.name);
      if (!(j.axis.norm() > 0.0)) throw InvalidArgument("HandModel: zero axis for " + j.name);
      joints_[i].axis.normalize();
      lo_[i] = j.limit_lo;
      hi_[i] = j.limit_hi;
      inertia_[i] = j.inertia;
      damping_[i] = j.viscous_damping;
      tau_max_[i] = j.tau_max;
    }
    // chains + cycle check
    chains_.assign(n, {});
    for (int i = 0; i < n; ++i) {
      std::vector<int> up;
      for (int k = i; k != -1; k = joints_[k].parent) {
        if (static_cast<int>(up.size()) > n) throw InvalidArgument("HandModel: parent cycle");
        up.push_back(k);
      }
      chains_[i].assign(up.rbegin(), up.rend());
    }
    // parents before children
    order_.clear();
    std::vector<char> done(n, 0);
    for (int i = 0; i < n; ++i)
      for (int k : chains_[i])
        if (!done[k]) {
          done[k] = 1;
          order_.push_back(k);
        }
    tips_.clear();
    for (int i = 0; i < n; ++i) {
      if (links_[i].fingertip_radius > 0.0) {
        std::string name = links_[i].tip_name.empty() ? joints_[i].name + "_tip" : links_[i].tip_name;
        tips_.push_back({name, i, links_[i].fingertip_radius});
      }
    }
    if (position_gains_.ks.size() == 0) position_gains_.ks = Vec::Constant(n, 40.0);
    if (position_gains_.kd.size() == 0) position_gains_.kd = Vec::Constant(n, 0.5);
    require_size(position_gains_.ks, n, "HandModel: position_mode_gains.ks");
    require_size(position_gains_.kd, n, "HandModel: position_mode_gains.kd");
  }

  std::vector<JointSpec> joints_;
  std::vector<LinkSpec> links_;
  Vec3 gravity_ = Vec3::Zero();
  PositionGains position_gains_;
  std::vector<Fingertip> tips_;
  std::vector<std::vector<int>> chains_;
  std::vector<int> order_;
  Vec lo_, hi_, inertia_, damping_, tau_max_;
};

inline Mat3 rpy_matrix(const Vec3& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

/// Chains rotations from the base out to every link. Does not look at limits.
inline Frames forward_kinematics(const HandModel& model, const Vec& q) {
  require_size(q, model.dofs(), "forward_kinematics: q");
  const int n = model.dofs();
  Frames f;
  f.rotation.resize(n);
  f.origin.resize(n);
  f.link_end.resize(n);
  for (int i : model.topological_order()) {
    const JointSpec& j = model.joints()[i];
    Mat3 parent_r = Mat3::Identity();
    Vec3 parent_p = Vec3::Zero();
    if (j.parent >= 0) {
      parent_r = f.rotation[j.parent];
      parent_p = f.origin[j.parent];
    }
    f.origin[i] = parent_p + parent_r * j.origin;
    f.rotation[i] = parent_r * rpy_matrix(j.rpy) * Eigen::AngleAxisd(q[i], j.axis).toRotationMatrix();
    f.link_end[i] = f.origin[i] + f.rotation[i] * Vec3(model.links()[i].length, 0.0, 0.0);
  }
  return f;
}

/// Fingertip sphere centers, one column per fingertip.
inline Mat3X fingertip_positions(const HandModel& model, const Vec& q) {
  const Frames f = forward_kinematics(model, q);
  Mat3X out(3, static_cast<Eigen::Index>(model.fingertips().size()));
  for (std::size_t k = 0; k < model.fingertips().size(); ++k) out.col(k) = f.link_end[model.fingertips()[k].joint];
  return out;
}

inline Vec3 fingertip_position(const HandModel& model, const Vec& q, int tip) {
  if (tip < 0 || tip >= static_cast<int>(model.fingertips().size()))
    throw InvalidArgument("unknown fingertip id " + std::to_string(tip));
  return forward_kinematics(model, q).link_end[model.fingertips()[tip].joint];
}

/// d(fingertip position)/dq by central differences (step 1e-6 rad). Joints off
/// the fingertip's chain get zero columns.
inline Mat fingertip_jacobian(const HandModel& model, const Vec& q, int tip, double step = 1e-6) {
  if (tip < 0 || tip >= static_cast<int>(model.fingertips().size()))
    throw InvalidArgument("fingertip_jacobian: unknown fingertip id " + std::to_string(tip));
  require_size(q, model.dofs(), "fingertip_jacobian: q");
  const int joint = model.fingertips()[tip].joint;
  Mat jac = Mat::Zero(3, model.dofs());
  Vec qp = q;
  for (int k : model.chain(joint)) {
    qp[k] = q[k] + step;
    const Vec3 plus = forward_kinematics(model, qp).link_end[joint];
    qp[k] = q[k] - step;
    const Vec3 minus = forward_kinematics(model, qp).link_end[joint];
    qp[k] = q[k];
    jac.col(k) = (plus - minus) / (2.0 * step);
  }
  return jac;
}

/// Joint torques from link weights, using the link midpoints as mass centers.
inline Vec gravity_torques(const HandModel& model, const Frames& f) {
  Vec tau = Vec::Zero(model.dofs());
  if (model.gravity().isZero()) return tau;
  for (int i = 0; i < model.dofs(); ++i) {
    const double m = model.links()[i].mass;
    if (m <= 0.0) continue;
    const Vec3 com = 0.5 * (f.origin[i] + f.link_end[i]);
    const Vec3 force = m * model.gravity();
    for (int k : model.chain(i)) {
      const Vec3 w = f.rotation[k] * model.joints()[k].axis;
      tau[k] += w.dot((com - f.origin[k]).cross(force));
    }
  }
  return tau;
}

// ---------------------------------------------------------------------------
// Model file (JSON text)

namespace detail {
inline Vec3 vec3_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}
inline nlohmann::json vec3_to(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

/// Scalar broadcast or per-DOF array.
inline Vec vec_from(const nlohmann::json& j, Eigen::Index n, const char* what) {
  if (j.is_number()) return Vec::Constant(n, j.get<double>());
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n)
    throw FormatError(std::string(what) + ": expected a number or an array of length " + std::to_string(n));
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = j[i].get<double>();
  return v;
}
inline nlohmann::json vec_to(const Vec& v) {
  auto a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}
}  // namespace detail

inline nlohmann::json model_to_json(const HandModel& m) {
  nlohmann::json j;
  j["format"] = "biohand-model";
  j["version"] = 1;
  j["gravity"] = detail::vec3_to(m.gravity());
  j["position_mode_gains"] = {{"ks", detail::vec_to(m.position_mode_gains().ks)},
                              {"kd", detail::vec_to(m.position_mode_gains().kd)}};
  auto joints = nlohmann::json::array();
  for (const auto& s : m.joints()) {
    joints.push_back({{"name", s.name},
                      {"parent", s.parent},
                      {"origin", detail::vec3_to(s.origin)},
                      {"rpy", detail::vec3_to(s.rpy)},
                      {"axis", detail::vec3_to(s.axis)},
                      {"limit_lo", s.limit_lo},
                      {"limit_hi", s.limit_hi},
                      {"inertia", s.inertia},
                      {"viscous_damping", s.viscous_damping},
                      {"tau_max", s.tau_max}});
  }
  auto links = nlohmann::json::array();
  for (const auto& l : m.links()) {
    nlohmann::json lj = {{"length", l.length}, {"fingertip_radius", l.fingertip_radius}, {"mass", l.mass}};
    if (!l.tip_name.empty()) lj["tip_name"] = l.tip_name;
    links.push_back(lj);
  }
  j["joints"] = joints;
  j["links"] = links;
  return j;
}

inline HandModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "biohand-model") throw FormatError("not a biohand model (format field)");
    std::vector<JointSpec> joints;
    for (const auto& jj : j.at("joints")) {
      JointSpec s;
      s.name = jj.at("name").get<std::string>();
      s.parent = jj.value("parent", -1);
      if (jj.contains("origin")) s.origin = detail::vec3_from(jj["origin"]);
      if (jj.contains("rpy")) s.rpy = detail::vec3_from(jj["rpy"]);
      if (jj.contains("axis")) s.axis = detail::vec3_from(jj["axis"]);
      s.limit_lo = jj.value("limit_lo", s.limit_lo);
      s.limit_hi = jj.value("limit_hi", s.limit_hi);
      s.inertia = jj.value("inertia", s.inertia);
      s.viscous_damping = jj.value("viscous_damping", s.viscous_damping);
      s.tau_max = jj.value("tau_max", s.tau_max);
      joints.push_back(std::move(s));
    }
    std::vector<LinkSpec> links;
    for (const auto& lj : j.at("links")) {
      LinkSpec l;
      l.length = lj.value("length", 0.0);
      l.fingertip_radius = lj.value("fingertip_radius", 0.0);
      l.mass = lj.value("mass", 0.0);
      l.tip_name = lj.value("tip_name", std::string());
      links.push_back(std::move(l));
    }
    const auto n = static_cast<Eigen::Index>(joints.size());
    Vec3 gravity = j.contains("gravity") ? detail::vec3_from(j["gravity"]) : Vec3::Zero();
    PositionGains pg;
    if (j.contains("position_mode_gains")) {
      pg.ks = detail::vec_from(j["position_mode_gains"].at("ks"), n, "position_mode_gains.ks");
      pg.kd = detail::vec_from(j["position_mode_gains"].at("kd"), n, "position_mode_gains.kd");
    }
    return HandModel(std::move(joints), std::move(links), gravity, std::move(pg));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model file: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
}

inline HandModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open model file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("model file " + path + ": " + e.what());
  }
  return model_from_json(j);
}

inline void save_model(const HandModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write model file " + path);
  out << model_to_json(m).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Built-in models

/// One revolute joint about +y with a link of `length`: the bench model for
/// disturbance and convergence studies.
inline HandModel single_joint_model(double inertia = 5e-3, double damping = 0.02, double tau_max = 5.0,
                                    double length = 0.1) {
  JointSpec j;
  j.name = "j0";
  j.inertia = inertia;
  j.viscous_damping = damping;
  j.tau_max = tau_max;
  LinkSpec l;
  l.length = length;
  l.fingertip_radius = 0.01;
  l.tip_name = "tip";
  return HandModel({j}, {l}, Vec3::Zero(), {});
}

/// 24-DOF five-finger hand: thumb 5, first/middle/ring 4 each, little 5, wrist 2.
///
/// Base frame: x along the extended fingers, z out of the back of the hand, so
/// positive finger flexion moves the tips towards -z. Joint order: TH J5..J1,
/// FF J4..J1, MF J4..J1, RF J4..J1, LF J5..J1, WR J2, WR J1.
inline HandModel default_hand24() {
  std::vector<JointSpec> joints;
  std::vector<LinkSpec> links;
  const int wrist_flex = 23;
  auto add = [&](std::string name, int parent, Vec3 origin, Vec3 rpy, Vec3 axis, double lo, double hi,
                 double length, double inertia, double tip_radius = 0.0, std::string tip = {}) {
    JointSpec j;
    j.name = std::move(name);
    j.parent = parent;
    j.origin = origin;
    j.rpy = rpy;
    j.axis = axis;
    j.limit_lo = lo;
    j.limit_hi = hi;
    j.inertia = inertia;
    j.viscous_damping = 0.02;
    j.tau_max = 1.0;
    joints.push_back(std::move(j));
    LinkSpec l;
    l.length = length;
    l.fingertip_radius = tip_radius;
    l.mass = length > 0.0 ? 0.4 * length : 0.0;  // ~0.4 kg/m
    l.tip_name = std::move(tip);
    links.push_back(std::move(l));
    return static_cast<int>(joints.size()) - 1;
  };
  const Vec3 X = Vec3::UnitX(), Y = Vec3::UnitY(), Z = Vec3::UnitZ(), O = Vec3::Zero();
  constexpr double kFinger = 5e-3;
  constexpr double kTipR = 0.01;

  // thumb: base under the first finger side of the palm, pointing forward-out
  int t5 = add("THJ5", wrist_flex, {0.045, 0.030, -0.020}, {0.0, 0.0, 0.6}, X, -1.05, 1.05, 0.0, kFinger);
  int t4 = add("THJ4", t5, O, O, Z, -1.2, 1.22, 0.038, kFinger);
  int t3 = add("THJ3", t4, {0.038, 0, 0}, O, Y, -0.21, 1.2, 0.0, kFinger);
  int t2 = add("THJ2", t3, O, O, Y, -0.70, 1.2, 0.032, kFinger);
  add("THJ1", t2, {0.032, 0, 0}, O, Y, -0.26, 1.57, 0.0275, kFinger, kTipR, "th");

  auto finger = [&](const std::string& p, double y, const std::string& tip) {
    int j4 = add(p + "J4", wrist_flex, {0.095, y, 0.0}, O, Z, -0.35, 0.35, 0.0, kFinger);
    int j3 = add(p + "J3", j4, O, O, Y, -0.26, 1.57, 0.045, kFinger);
    int j2 = add(p + "J2", j3, {0.045, 0, 0}, O, Y, 0.0, 1.57, 0.025, kFinger);
    add(p + "J1", j2, {0.025, 0, 0}, O, Y, 0.0, 1.57, 0.026, kFinger, kTipR, tip);
  };
  finger("FF", 0.033, "ff");
  finger("MF", 0.011, "mf");
  finger("RF", -0.011, "rf");

  int l5 = add("LFJ5", wrist_flex, {0.030, -0.033, 0.0}, O, X, 0.0, 0.79, 0.065, kFinger);
  int l4 = add("LFJ4", l5, {0.065, 0, 0}, O, Z, -0.35, 0.35, 0.0, kFinger);
  int l3 = add("LFJ3", l4, O, O, Y, -0.26, 1.57, 0.045, kFinger);
  int l2 = add("LFJ2", l3, {0.045, 0, 0}, O, Y, 0.0, 1.57, 0.025, kFinger);
  add("LFJ1", l2, {0.025, 0, 0}, O, Y, 0.0, 1.57, 0.026, kFinger, kTipR, "lf");

  int w2 = add("WRJ2", -1, O, O, Z, -0.52, 0.17, 0.0, 2e-2);
  add("WRJ1", w2, O, O, Y, -0.70, 0.49, 0.0, 2e-2);
  joints[22].tau_max = 5.0;
  joints[23].tau_max = 5.0;
  joints[22].viscous_damping = 0.2;
  joints[23].viscous_damping = 0.2;

  PositionGains pg{Vec::Constant(24, 120.0), Vec::Constant(24, 0.5)};
  pg.ks.tail(2).setConstant(100.0);
  pg.kd.tail(2).setConstant(2.0);
  return HandModel(std::move(joints), std::move(links), Vec3(0.0, 0.0, -9.81), std::move(pg));
}

}  // namespace biohand

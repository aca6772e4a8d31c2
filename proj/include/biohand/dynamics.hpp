#pragma once

#include <sstream>
#include <vector>

#include "biohand/hand_model.hpp"
#include "biohand/scene.hpp"

namespace biohand {

struct ContactEvent {
  double time = 0.0;
  int fingertip = -1;
  std::string object;
  Vec3 point = Vec3::Zero();   // on the object surface
  Vec3 normal = Vec3::UnitZ(); // object outward normal, pushes the fingertip
  double force_magnitude = 0.0;
  double normal_force = 0.0;
  Vec3 force = Vec3::Zero();   // on the fingertip
};

struct Contact {
  ContactEvent event;
  int object_index = -1;
  Vec joint_torque;            // J^T f
};

/// Penalty contact between every fingertip sphere and every object.
///
/// Normal force f_n = max(0, k_c d + b_c d_dot) for penetration depth d > 0;
/// tangential force opposes slip with magnitude min(mu f_n, b_t |v_t|).
inline std::vector<Contact> detect_contacts(const HandModel& model, const Vec& q, const Vec& q_dot, const Scene& scene,
                                            const SceneState& scene_state, double time = 0.0) {
  require_size(q, model.dofs(), "detect_contacts: q");
  require_size(q_dot, model.dofs(), "detect_contacts: q_dot");
  if (scene_state.size() != scene.objects.size())
    throw InvalidArgument("detect_contacts: scene state does not match scene");
  std::vector<Contact> out;
  if (scene.objects.empty()) return out;
  const Frames frames = forward_kinematics(model, q);
  const auto& tips = model.fingertips();
  for (std::size_t t = 0; t < tips.size(); ++t) {
    const Vec3 center = frames.link_end[tips[t].joint];
    Mat jac;
    for (std::size_t o = 0; o < scene.objects.size(); ++o) {
      const SceneObject& obj = scene.objects[o];
      const SurfaceQuery sq = query_object(obj, scene_state[o], center);
      const double depth = tips[t].radius - sq.distance;
      if (!(depth > 0.0)) continue;
      if (jac.size() == 0) jac = fingertip_jacobian(model, q, static_cast<int>(t));
      const Vec3 v_tip = jac * q_dot;
      const Vec3 v_rel = v_tip - object_point_velocity(obj, scene_state[o], sq.point);
      const double depth_rate = -sq.normal.dot(v_rel);
      const double fn = std::max(0.0, obj.stiffness * depth + obj.damping * depth_rate);
      const Vec3 v_t = v_rel - sq.normal.dot(v_rel) * sq.normal;
      const double slip = v_t.norm();
      Vec3 ft = Vec3::Zero();
      if (slip > 0.0) ft = -std::min(obj.friction * fn, obj.tangential_damping * slip) * (v_t / slip);
      const Vec3 f = fn * sq.normal + ft;

      Contact c;
      c.object_index = static_cast<int>(o);
      c.event.time = time;
      c.event.fingertip = static_cast<int>(t);
      c.event.object = obj.id;
      c.event.point = sq.point;
      c.event.normal = sq.normal;
      c.event.normal_force = fn;
      c.event.force = f;
      c.event.force_magnitude = f.norm();
      c.joint_torque = jac.transpose() * f;
      out.push_back(std::move(c));
    }
  }
  return out;
}

struct StepResult {
  JointState state;
  SceneState scene_state;
  std::vector<ContactEvent> contacts;
};

namespace detail {
inline std::string dump_state(const JointState& s, const SceneState& ss) {
  std::ostringstream os;
  os.precision(17);
  os << "t=" << s.t << "\nq=" << s.q.transpose() << "\nq_dot=" << s.q_dot.transpose();
  for (std::size_t i = 0; i < ss.size(); ++i)
    os << "\nobject[" << i << "] offset=" << ss[i].offset.transpose() << " velocity=" << ss[i].velocity.transpose()
       << " angle=" << ss[i].angle << " rate=" << ss[i].rate;
  return os.str();
}
}  // namespace detail

/// Advance hand and objects by dt with semi-implicit Euler.
///
/// Each joint is an independent second-order system,
///   I_i q_ddot_i = tau_i - b_i q_dot_i + tau_contact_i + tau_gravity_i,
/// coupled only through contact. Joint limits clamp q and zero velocity into
/// the limit.
inline StepResult step_dynamics(const HandModel& model, const JointState& state, const Vec& tau, const Scene& scene,
                                const SceneState& scene_state, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("step_dynamics: dt must be > 0");
  const int n = model.dofs();
  require_size(state.q, n, "step_dynamics: q");
  require_size(state.q_dot, n, "step_dynamics: q_dot");
  require_size(tau, n, "step_dynamics: tau");

  const std::vector<Contact> contacts = detect_contacts(model, state.q, state.q_dot, scene, scene_state, state.t + dt);
  Vec tau_ext = Vec::Zero(n);
  if (!model.gravity().isZero()) tau_ext += gravity_torques(model, forward_kinematics(model, state.q));

  std::vector<Vec3> obj_force(scene.objects.size(), Vec3::Zero());
  std::vector<double> obj_torque(scene.objects.size(), 0.0);
  StepResult out;
  out.contacts.reserve(contacts.size());
  for (const Contact& c : contacts) {
    tau_ext += c.joint_torque;
    const SceneObject& obj = scene.objects[c.object_index];
    const Vec3 reaction = -c.event.force;
    obj_force[c.object_index] += reaction;
    if (obj.mobility == Mobility::SingleAxis)
      obj_torque[c.object_index] += obj.axis.normalized().dot((c.event.point - obj.axis_point).cross(reaction));
    out.contacts.push_back(c.event);
  }

  out.state.t = state.t + dt;
  const Vec q_ddot = (tau - model.viscous_damping().cwiseProduct(state.q_dot) + tau_ext).cwiseQuotient(model.inertia());
  out.state.q_dot = state.q_dot + q_ddot * dt;
  out.state.q = state.q + out.state.q_dot * dt;
  for (int i = 0; i < n; ++i) {
    if (out.state.q[i] <= model.limit_lo()[i]) {
      out.state.q[i] = model.limit_lo()[i];
      out.state.q_dot[i] = std::max(0.0, out.state.q_dot[i]);
    } else if (out.state.q[i] >= model.limit_hi()[i]) {
      out.state.q[i] = model.limit_hi()[i];
      out.state.q_dot[i] = std::min(0.0, out.state.q_dot[i]);
    }
  }

  out.scene_state = scene_state;
  for (std::size_t o = 0; o < scene.objects.size(); ++o) {
    const SceneObject& obj = scene.objects[o];
    ObjectState& st = out.scene_state[o];
    if (obj.mobility == Mobility::Free) {
      if (out.state.t <= obj.release_time) {
        st.velocity.setZero();
        continue;
      }
      const Vec3 acc = (obj_force[o] - obj.linear_drag * st.velocity) / obj.mass + scene.gravity;
      st.velocity += acc * dt;
      st.offset += st.velocity * dt;
    } else if (obj.mobility == Mobility::SingleAxis) {
      double torque = obj_torque[o] - obj.axis_viscous * st.rate - obj.axis_spring * st.angle;
      // Coulomb friction: sticks when the remaining torque cannot overcome it
      if (obj.axis_coulomb > 0.0) {
        if (st.rate == 0.0 && std::abs(torque) <= obj.axis_coulomb) {
          continue;
        }
        const double dir = st.rate != 0.0 ? (st.rate > 0.0 ? 1.0 : -1.0) : (torque > 0.0 ? 1.0 : -1.0);
        const double next_rate = st.rate + (torque - dir * obj.axis_coulomb) / obj.axis_inertia * dt;
        // friction cannot reverse the motion within a step
        st.rate = (st.rate != 0.0 && next_rate * st.rate < 0.0) ? 0.0 : next_rate;
      } else {
        st.rate += torque / obj.axis_inertia * dt;
      }
      st.angle += st.rate * dt;
      if (st.angle <= obj.axis_lo) {
        st.angle = obj.axis_lo;
        st.rate = std::max(0.0, st.rate);
      } else if (st.angle >= obj.axis_hi) {
        st.angle = obj.axis_hi;
        st.rate = std::min(0.0, st.rate);
      }
    }
  }

  bool finite = out.state.q.allFinite() && out.state.q_dot.allFinite();
  for (const auto& st : out.scene_state)
    finite = finite && st.offset.allFinite() && st.velocity.allFinite() && std::isfinite(st.angle) &&
             std::isfinite(st.rate);
  if (!finite) throw SimulationFault("step_dynamics: non-finite state\n" + detail::dump_state(out.state, out.scene_state));
  return out;
}

}  // namespace biohand

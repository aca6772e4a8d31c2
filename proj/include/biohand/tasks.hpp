#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biohand/ik.hpp"
#include "biohand/reference.hpp"
#include "biohand/scene.hpp"

namespace biohand {

/// Scripted demonstration for one of the shipped task families. Stands in for a
/// human teleoperator: targets are placed on the object the hand can see.
struct TaskScript {
  std::string task;                 // grasp | door | cap | touch
  std::string object;               // scene object id the script works on
  std::vector<double> timing;       // phase end times, strictly increasing (see each generator)
  std::vector<std::string> fingers; // fingertip names taking part; empty -> task default
  double squeeze = 0.002;           // commanded depth past the surface, m
  double standoff = 0.015;          // pre-contact clearance, m
  double adjust = 0.002;            // grasp: extra thumb push during the adjust phase, m
  double travel = 0.03;             // door: pull distance; cap: stroke arc length, m
  int strokes = 2;                  // cap: number of strokes
  std::map<std::string, Vec3> directions;  // grasp: contact direction per fingertip (from center)
  std::map<std::string, double> spots;     // touch: target x per fingertip
};

inline TaskScript task_script_from_json(const nlohmann::json& j) {
  TaskScript s;
  s.task = j.at("task").get<std::string>();
  s.object = j.at("object").get<std::string>();
  s.timing = j.at("timing").get<std::vector<double>>();
  s.fingers = j.value("fingers", std::vector<std::string>{});
  s.squeeze = j.value("squeeze", s.squeeze);
  s.standoff = j.value("standoff", s.standoff);
  s.adjust = j.value("adjust", s.adjust);
  s.travel = j.value("travel", s.travel);
  s.strokes = j.value("strokes", s.strokes);
  if (j.contains("directions"))
    for (const auto& [k, v] : j["directions"].items()) s.directions[k] = detail::vec3_from(v);
  if (j.contains("spots"))
    for (const auto& [k, v] : j["spots"].items()) s.spots[k] = v.get<double>();
  return s;
}

inline nlohmann::json task_script_to_json(const TaskScript& s) {
  nlohmann::json j = {{"kind", "scripted"}, {"task", s.task},       {"object", s.object},
                      {"timing", s.timing}, {"squeeze", s.squeeze}, {"standoff", s.standoff}};
  if (!s.fingers.empty()) j["fingers"] = s.fingers;
  if (s.task == "grasp") j["adjust"] = s.adjust;
  if (s.task == "door" || s.task == "cap") j["travel"] = s.travel;
  if (s.task == "cap") j["strokes"] = s.strokes;
  for (const auto& [k, v] : s.directions) j["directions"][k] = detail::vec3_to(v);
  for (const auto& [k, v] : s.spots) j["spots"][k] = v;
  return j;
}

namespace detail {

inline void require_increasing(const std::vector<double>& t, std::size_t n, const std::string& task,
                               bool allow_equal_second = false) {
  if (t.size() != n) throw InvalidArgument(task + " timing: expected " + std::to_string(n) + " phase end times");
  double prev = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool equal_ok = allow_equal_second && i == 1;
    if (equal_ok ? !(t[i] >= prev) : !(t[i] > prev))
      throw InvalidArgument(task + " timing: phase end times must be increasing");
    prev = t[i];
  }
}

inline std::vector<int> wrist_joints(const HandModel& model) {
  std::vector<int> w;
  for (int i = 0; i < model.dofs(); ++i)
    if (model.joints()[i].name.rfind("WR", 0) == 0) w.push_back(i);
  return w;
}

/// Moves one finger of q so its tip sits at target (warm-started from q).
inline Vec place_tip(const HandModel& model, Vec q, const std::string& tip_name, const Vec3& target) {
  const int tip = model.fingertip_index(tip_name);
  IkResult r = solve_fingertip_ik(model, q, tip, target, finger_joints(model, tip, wrist_joints(model)), 400);
  return r.q;
}

inline const SceneObject& find_object(const Scene& scene, const std::string& id) {
  for (const auto& o : scene.objects)
    if (o.id == id) return o;
  throw InvalidArgument("script refers to unknown object '" + id + "'");
}

inline std::vector<std::string> fingers_or(const TaskScript& s, std::vector<std::string> def) {
  return s.fingers.empty() ? def : s.fingers;
}

}  // namespace detail

/// Three-finger grasp: the thumb reaches the object, adjusts it, then the
/// first and little fingers close. timing = {thumb contact, adjust end, close end};
/// adjust end may equal thumb contact (no adjust phase). Other fingers stay at rest.
inline ReferencePtr scripted_grasp_reference(const HandModel& model, const Vec3& center, double radius,
                                             const TaskScript& script) {
  detail::require_increasing(script.timing, 3, "grasp", true);
  const double t1 = script.timing[0], t2 = script.timing[1], t3 = script.timing[2];
  std::map<std::string, Vec3> dirs = {{"th", Vec3(-0.7, 0.2, -0.5)}, {"ff", Vec3(0.3, 0.8, -0.5)},
                                      {"lf", Vec3(0.3, -0.8, -0.5)}};
  for (const auto& [k, v] : script.directions) dirs[k] = v;
  auto dir = [&](const std::string& f) {
    auto it = dirs.find(f);
    if (it == dirs.end()) throw InvalidArgument("grasp: no contact direction for fingertip '" + f + "'");
    return Vec3(it->second.normalized());
  };
  auto reach = [&](const std::string& f, double extra) {
    const double r_tip = model.fingertips()[model.fingertip_index(f)].radius;
    return Vec3(center + dir(f) * (radius + r_tip + extra));
  };
  const std::vector<std::string> fingers = detail::fingers_or(script, {"th", "ff", "lf"});
  const std::string thumb = fingers.front();
  const std::vector<std::string> closers(fingers.begin() + 1, fingers.end());

  const Vec rest = model.clamp(Vec::Zero(model.dofs()));
  std::vector<Waypoint> wp{{0.0, rest}};
  Vec q = detail::place_tip(model, rest, thumb, reach(thumb, script.standoff));
  wp.push_back({0.6 * t1, q});
  q = detail::place_tip(model, q, thumb, reach(thumb, -script.squeeze));
  wp.push_back({t1, q});
  if (t2 > t1) {
    q = detail::place_tip(model, q, thumb, reach(thumb, -script.squeeze - script.adjust));
    wp.push_back({t2, q});
  }
  Vec pre = q;
  for (const auto& f : closers) pre = detail::place_tip(model, pre, f, reach(f, script.standoff));
  wp.push_back({t2 + 0.6 * (t3 - t2), pre});
  Vec fin = pre;
  for (const auto& f : closers) fin = detail::place_tip(model, fin, f, reach(f, -script.squeeze));
  wp.push_back({t3, fin});
  return std::make_shared<WaypointReference>(std::move(wp));
}

/// Hook the fingers behind a bar handle lying along y and pull it towards the
/// palm (-x). timing = {above the bar, hooked, pull end}.
inline ReferencePtr scripted_door_reference(const HandModel& model, const SceneObject& handle,
                                            const TaskScript& script) {
  detail::require_increasing(script.timing, 3, "door");
  if (handle.parts.empty() || handle.parts.front().kind != Primitive::Kind::Cylinder)
    throw InvalidArgument("door: object has no bar handle");
  const Primitive& bar = handle.parts.front();
  const Vec3 bar_center = handle.orientation * bar.offset + handle.position;
  const Vec3 bar_dir = handle.orientation * bar.rotation * Vec3::UnitZ();
  if (std::abs(bar_dir.y()) < 0.5) throw InvalidArgument("door: handle bar must run roughly along y");
  const std::vector<std::string> fingers = detail::fingers_or(script, {"ff", "mf", "rf", "lf"});
  const Vec rest = model.clamp(Vec::Zero(model.dofs()));
  const Frames rest_frames = forward_kinematics(model, rest);

  Vec above = rest, hooked = rest;
  std::vector<Vec3> hook_targets;
  for (const auto& f : fingers) {
    const int tip = model.fingertip_index(f);
    const double r_tip = model.fingertips()[tip].radius;
    const double y = rest_frames.link_end[model.fingertips()[tip].joint].y();
    const Vec3 on_bar = bar_center + bar_dir * ((y - bar_center.y()) / bar_dir.y());
    const double behind = bar.radius + r_tip;
    above = detail::place_tip(model, above, f, on_bar + Vec3(behind + script.standoff, 0.0, behind + script.standoff));
    const Vec3 hook = on_bar + Vec3(behind - script.squeeze, 0.0, 0.0);
    hooked = detail::place_tip(model, hooked, f, hook);
    hook_targets.push_back(hook);
  }
  std::vector<Waypoint> wp{{0.0, rest}, {script.timing[0], above}, {script.timing[1], hooked}};
  constexpr int kPullSegments = 4;
  Vec q = hooked;
  for (int k = 1; k <= kPullSegments; ++k) {
    const double frac = static_cast<double>(k) / kPullSegments;
    for (std::size_t i = 0; i < fingers.size(); ++i)
      q = detail::place_tip(model, q, fingers[i], hook_targets[i] - Vec3(script.travel * frac, 0.0, 0.0));
    wp.push_back({script.timing[1] + frac * (script.timing[2] - script.timing[1]), q});
  }
  return std::make_shared<WaypointReference>(std::move(wp));
}

/// Rub the top of a cap (cylinder, axis along y) towards the palm in repeated
/// strokes. timing = {first contact, stroke duration, return duration}.
inline ReferencePtr scripted_cap_reference(const HandModel& model, const SceneObject& cap, const TaskScript& script) {
  if (script.timing.size() != 3 || !(script.timing[0] > 0.0) || !(script.timing[1] > 0.0) ||
      !(script.timing[2] > 0.0))
    throw InvalidArgument("cap timing: expected {reach, stroke, return} durations, all > 0");
  if (script.strokes < 1) throw InvalidArgument("cap: strokes must be >= 1");
  if (cap.parts.empty() || cap.parts.front().kind != Primitive::Kind::Cylinder)
    throw InvalidArgument("cap: object is not a cylinder");
  const double radius = cap.parts.front().radius;
  const Vec3 center = cap.position;
  const std::vector<std::string> fingers = detail::fingers_or(script, {"ff", "mf", "rf"});
  const Vec rest = model.clamp(Vec::Zero(model.dofs()));
  const Frames rest_frames = forward_kinematics(model, rest);
  const double half_arc = 0.5 * script.travel / radius;

  // fingertip target at angle phi from the top, measured towards +x
  auto pose_at = [&](Vec q, double phi, double extra) {
    for (const auto& f : fingers) {
      const int tip = model.fingertip_index(f);
      const double r = radius + model.fingertips()[tip].radius + extra;
      const double y = rest_frames.link_end[model.fingertips()[tip].joint].y();
      q = detail::place_tip(model, q, f, Vec3(center.x() + r * std::sin(phi), y, center.z() + r * std::cos(phi)));
    }
    return q;
  };
  const Vec lifted_start = pose_at(rest, half_arc, script.standoff);
  const Vec start = pose_at(lifted_start, half_arc, -script.squeeze);
  const Vec end = pose_at(start, -half_arc, -script.squeeze);
  const Vec lifted_end = pose_at(end, -half_arc, script.standoff);
  // compliant fingers sag, so the way back passes well clear of the cap
  const Vec clear = pose_at(lifted_end, 0.0, 3.0 * script.standoff);

  std::vector<Waypoint> wp{{0.0, rest}, {0.6 * script.timing[0], lifted_start}, {script.timing[0], start}};
  double t = script.timing[0];
  for (int k = 0; k < script.strokes; ++k) {
    t += script.timing[1];
    wp.push_back({t, end});
    if (k + 1 < script.strokes) {
      wp.push_back({t + 0.2 * script.timing[2], lifted_end});
      wp.push_back({t + 0.5 * script.timing[2], clear});
      wp.push_back({t + 0.8 * script.timing[2], lifted_start});
      t += script.timing[2];
      wp.push_back({t, start});
    }
  }
  return std::make_shared<WaypointReference>(std::move(wp));
}

/// Lower fingertips onto a curved surface and hold a light press.
/// timing = {above the surface, pressed}.
inline ReferencePtr scripted_touch_reference(const HandModel& model, const SceneObject& surface,
                                             const TaskScript& script) {
  detail::require_increasing(script.timing, 2, "touch");
  const std::vector<std::string> fingers = detail::fingers_or(script, {"ff", "mf", "rf"});
  const Vec rest = model.clamp(Vec::Zero(model.dofs()));
  const Frames rest_frames = forward_kinematics(model, rest);
  const ObjectState still{};

  Vec above = rest, pressed = rest;
  for (const auto& f : fingers) {
    const int tip = model.fingertip_index(f);
    const double r_tip = model.fingertips()[tip].radius;
    const Vec3 rest_tip = rest_frames.link_end[model.fingertips()[tip].joint];
    const auto spot = script.spots.find(f);
    const double x = spot != script.spots.end() ? spot->second : surface.position.x();
    // bisect along a vertical line, from the object origin up, for the top surface
    double hi = surface.position.z() + 0.2, lo = surface.position.z();
    if (query_object(surface, still, Vec3(x, rest_tip.y(), hi)).distance <= 0.0 ||
        query_object(surface, still, Vec3(x, rest_tip.y(), lo)).distance > 0.0)
      throw InvalidArgument("touch: no surface below fingertip '" + f + "'");
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (query_object(surface, still, Vec3(x, rest_tip.y(), mid)).distance > 0.0 ? hi : lo) = mid;
    }
    const SurfaceQuery sq = query_object(surface, still, Vec3(x, rest_tip.y(), hi));
    above = detail::place_tip(model, above, f, sq.point + sq.normal * (r_tip + script.standoff));
    pressed = detail::place_tip(model, pressed, f, sq.point + sq.normal * (r_tip - script.squeeze));
  }
  std::vector<Waypoint> wp{{0.0, rest}, {script.timing[0], above}, {script.timing[1], pressed}};
  return std::make_shared<WaypointReference>(std::move(wp));
}

/// Dispatch on script.task against the (possibly perturbed) scene.
inline ReferencePtr scripted_task_reference(const HandModel& model, const Scene& scene, const TaskScript& script) {
  const SceneObject& obj = detail::find_object(scene, script.object);
  if (script.task == "grasp") {
    if (obj.parts.empty() || obj.parts.front().kind != Primitive::Kind::Sphere)
      throw InvalidArgument("grasp: object must be a sphere");
    return scripted_grasp_reference(model, obj.position + obj.orientation * obj.parts.front().offset,
                                    obj.parts.front().radius, script);
  }
  if (script.task == "door") return scripted_door_reference(model, obj, script);
  if (script.task == "cap") return scripted_cap_reference(model, obj, script);
  if (script.task == "touch") return scripted_touch_reference(model, obj, script);
  throw InvalidArgument("unknown scripted task '" + script.task + "'");
}

}  // namespace biohand

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biohand/hand_model.hpp"

namespace biohand {

enum class Shape { Sphere, Box, Cylinder, Plane, CappedBox, HingedPanel, CappedRotor };
enum class Mobility { Fixed, Free, SingleAxis };

inline const char* to_string(Shape s) {
  switch (s) {
    case Shape::Sphere: return "sphere";
    case Shape::Box: return "box";
    case Shape::Cylinder: return "cylinder";
    case Shape::Plane: return "plane";
    case Shape::CappedBox: return "capped_box";
    case Shape::HingedPanel: return "hinged_panel";
    case Shape::CappedRotor: return "capped_rotor";
  }
  return "?";
}

inline const char* to_string(Mobility m) {
  switch (m) {
    case Mobility::Fixed: return "fixed";
    case Mobility::Free: return "free";
    case Mobility::SingleAxis: return "single_axis";
  }
  return "?";
}

/// Solid primitive in its object's local frame.
struct Primitive {
  enum class Kind { Sphere, Box, Cylinder, Plane } kind = Kind::Sphere;
  Vec3 offset = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
  double radius = 0.0;              // sphere, cylinder
  double half_length = 0.0;         // cylinder, along local z
  Vec3 half_extents = Vec3::Zero(); // box
};

struct SurfaceQuery {
  double distance = std::numeric_limits<double>::infinity();  // signed, negative inside
  Vec3 normal = Vec3::UnitZ();                                 // outward unit normal
  Vec3 point = Vec3::Zero();                                   // closest surface point
};

namespace detail {

// Signed distance and outward normal in the primitive's own frame.
inline SurfaceQuery primitive_query_local(const Primitive& p, const Vec3& x) {
  SurfaceQuery out;
  switch (p.kind) {
    case Primitive::Kind::Sphere: {
      const double r = x.norm();
      out.normal = r > 1e-15 ? Vec3(x / r) : Vec3::UnitZ();
      out.distance = r - p.radius;
      break;
    }
    case Primitive::Kind::Plane: {
      out.normal = Vec3::UnitZ();
      out.distance = x.z();
      break;
    }
    case Primitive::Kind::Box: {
      const Vec3 h = p.half_extents;
      const Vec3 d = x.cwiseAbs() - h;
      if ((d.array() > 0.0).any()) {
        const Vec3 clamped = x.cwiseMax(-h).cwiseMin(h);
        const Vec3 diff = x - clamped;
        out.distance = diff.norm();
        out.normal = diff / out.distance;
      } else {
        Eigen::Index axis = 0;
        out.distance = d.maxCoeff(&axis);
        out.normal = Vec3::Zero();
        out.normal[axis] = x[axis] >= 0.0 ? 1.0 : -1.0;
      }
      break;
    }
    case Primitive::Kind::Cylinder: {
      const double rho = std::hypot(x.x(), x.y());
      const Vec3 radial = rho > 1e-15 ? Vec3(x.x() / rho, x.y() / rho, 0.0) : Vec3::UnitX();
      const double dr = rho - p.radius;
      const double dz = std::abs(x.z()) - p.half_length;
      const Vec3 axial(0.0, 0.0, x.z() >= 0.0 ? 1.0 : -1.0);
      if (dr > 0.0 && dz > 0.0) {
        out.distance = std::hypot(dr, dz);
        out.normal = (dr * radial + dz * axial) / out.distance;
      } else if (dr > dz) {
        out.distance = dr;
        out.normal = radial;
      } else {
        out.distance = dz;
        out.normal = axial;
      }
      break;
    }
  }
  out.point = x - out.distance * out.normal;
  return out;
}

}  // namespace detail

/// A rigid scene object. Geometry is the union of `parts` in the object frame.
struct SceneObject {
  std::string id;
  Shape shape = Shape::Sphere;
  std::vector<Primitive> parts;
  Vec3 position = Vec3::Zero();        // object frame origin at articulation zero
  Mat3 orientation = Mat3::Identity();
  Mobility mobility = Mobility::Fixed;

  // contact
  double stiffness = 5000.0;            // k_c, N/m
  double damping = 50.0;                // b_c, N s/m
  double friction = 0.8;                // mu
  double tangential_damping = 20.0;     // slip regularization below the Coulomb cap, N s/m

  // free body (translation only)
  double mass = 0.1;
  double linear_drag = 0.05;            // N s/m
  double release_time = 0.0;            // held in place before this time

  // single-axis articulation
  Vec3 axis = Vec3::UnitZ();            // world direction
  Vec3 axis_point = Vec3::Zero();       // a world point on the axis
  double axis_inertia = 1e-3;           // kg m^2
  double axis_viscous = 1e-3;           // N m s/rad
  double axis_coulomb = 0.0;            // N m
  double axis_spring = 0.0;             // N m/rad, towards zero
  double axis_lo = -1e9;
  double axis_hi = 1e9;

  void validate() const {
    if (!(stiffness > 0.0)) throw InvalidArgument("object " + id + ": contact stiffness must be > 0");
    if (!(damping >= 0.0)) throw InvalidArgument("object " + id + ": contact damping must be >= 0");
    if (!(friction >= 0.0)) throw InvalidArgument("object " + id + ": friction must be >= 0");
    if (!(tangential_damping >= 0.0)) throw InvalidArgument("object " + id + ": tangential damping must be >= 0");
    if (parts.empty()) throw InvalidArgument("object " + id + ": no geometry");
    if (mobility == Mobility::Free && !(mass > 0.0)) throw InvalidArgument("object " + id + ": mass must be > 0");
    if (mobility == Mobility::SingleAxis) {
      if (!(axis.norm() > 0.0)) throw InvalidArgument("object " + id + ": zero axis");
      if (!(axis_inertia > 0.0)) throw InvalidArgument("object " + id + ": axis inertia must be > 0");
      if (!(axis_lo < axis_hi)) throw InvalidArgument("object " + id + ": axis_lo must be < axis_hi");
    }
  }
};

/// Mutable state of one object: translation offset for free bodies,
/// articulation coordinate for single-axis bodies.
struct ObjectState {
  Vec3 offset = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double angle = 0.0;
  double rate = 0.0;

  bool operator==(const ObjectState&) const = default;
};

struct Scene {
  Vec3 gravity = Vec3::Zero();
  std::vector<SceneObject> objects;
};

using SceneState = std::vector<ObjectState>;

inline SceneState initial_scene_state(const Scene& scene) { return SceneState(scene.objects.size()); }

/// Current rigid motion of an object: world = rotation * (base - pivot) + pivot + offset.
struct ObjectMotion {
  Mat3 rotation = Mat3::Identity();
  Vec3 pivot = Vec3::Zero();
  Vec3 offset = Vec3::Zero();

  [[nodiscard]] Vec3 apply(const Vec3& base) const { return rotation * (base - pivot) + pivot + offset; }
  [[nodiscard]] Vec3 invert(const Vec3& world) const { return rotation.transpose() * (world - pivot - offset) + pivot; }
};

inline ObjectMotion object_motion(const SceneObject& obj, const ObjectState& st) {
  ObjectMotion m;
  if (obj.mobility == Mobility::Free) m.offset = st.offset;
  if (obj.mobility == Mobility::SingleAxis) {
    m.rotation = Eigen::AngleAxisd(st.angle, obj.axis.normalized()).toRotationMatrix();
    m.pivot = obj.axis_point;
  }
  return m;
}

/// Signed distance from a world point to the object's current surface.
inline SurfaceQuery query_object(const SceneObject& obj, const ObjectState& st, const Vec3& world) {
  const ObjectMotion motion = object_motion(obj, st);
  const Vec3 base = motion.invert(world);
  const Vec3 local = obj.orientation.transpose() * (base - obj.position);
  SurfaceQuery best;
  for (const Primitive& p : obj.parts) {
    const Vec3 x = p.rotation.transpose() * (local - p.offset);
    SurfaceQuery q = detail::primitive_query_local(p, x);
    if (q.distance < best.distance) {
      best.distance = q.distance;
      best.normal = p.rotation * q.normal;
      best.point = p.rotation * q.point + p.offset;
    }
  }
  best.normal = motion.rotation * (obj.orientation * best.normal);
  best.point = motion.apply(obj.orientation * best.point + obj.position);
  return best;
}

/// Velocity of the object's material point currently at `world`.
inline Vec3 object_point_velocity(const SceneObject& obj, const ObjectState& st, const Vec3& world) {
  switch (obj.mobility) {
    case Mobility::Fixed: return Vec3::Zero();
    case Mobility::Free: return st.velocity;
    case Mobility::SingleAxis: return (st.rate * obj.axis.normalized()).cross(world - obj.axis_point);
  }
  return Vec3::Zero();
}

/// Scalar articulation coordinate: rotation angle for single-axis bodies,
/// displacement length for free bodies, zero otherwise.
inline double articulation(const SceneObject& obj, const ObjectState& st) {
  switch (obj.mobility) {
    case Mobility::Fixed: return 0.0;
    case Mobility::Free: return st.offset.norm();
    case Mobility::SingleAxis: return st.angle;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Scene description (JSON, embedded in scenario files)

inline Shape parse_shape(const std::string& s) {
  for (Shape v : {Shape::Sphere, Shape::Box, Shape::Cylinder, Shape::Plane, Shape::CappedBox, Shape::HingedPanel,
                  Shape::CappedRotor})
    if (s == to_string(v)) return v;
  throw FormatError("unknown object shape '" + s + "'");
}

inline Mobility parse_mobility(const std::string& s) {
  for (Mobility v : {Mobility::Fixed, Mobility::Free, Mobility::SingleAxis})
    if (s == to_string(v)) return v;
  throw FormatError("unknown object mobility '" + s + "'");
}

/// Geometry presets per shape. Dimensions come from the object's JSON block:
///  sphere: radius | box: half_extents | cylinder: radius, half_length (local z)
///  plane: local z normal | capped_box: half_extents + cap_radius dome on the +z face
///  hinged_panel: handle bar (radius, half_length along local y) at handle_offset,
///     optional panel half_extents | capped_rotor: cylinder radius, half_length (local z)
inline std::vector<Primitive> shape_parts(Shape shape, const nlohmann::json& g) {
  using K = Primitive::Kind;
  std::vector<Primitive> parts;
  auto v3 = [&](const char* key, Vec3 def) { return g.contains(key) ? detail::vec3_from(g[key]) : def; };
  switch (shape) {
    case Shape::Sphere:
      parts.push_back({K::Sphere, Vec3::Zero(), Mat3::Identity(), g.at("radius").get<double>()});
      break;
    case Shape::Box: {
      Primitive p{K::Box};
      p.half_extents = detail::vec3_from(g.at("half_extents"));
      parts.push_back(p);
      break;
    }
    case Shape::Cylinder:
    case Shape::CappedRotor: {
      Primitive p{K::Cylinder};
      p.radius = g.at("radius").get<double>();
      p.half_length = g.at("half_length").get<double>();
      parts.push_back(p);
      break;
    }
    case Shape::Plane:
      parts.push_back({K::Plane});
      break;
    case Shape::CappedBox: {
      Primitive box{K::Box};
      box.half_extents = detail::vec3_from(g.at("half_extents"));
      const double r = g.at("cap_radius").get<double>();
      const double lift = g.value("cap_lift", 0.0);
      Primitive cap{K::Sphere};
      cap.radius = r;
      cap.offset = Vec3(0.0, 0.0, box.half_extents.z() + lift - r);
      parts.push_back(box);
      parts.push_back(cap);
      break;
    }
    case Shape::HingedPanel: {
      Primitive bar{K::Cylinder};
      bar.radius = g.at("radius").get<double>();
      bar.half_length = g.at("half_length").get<double>();
      bar.offset = v3("handle_offset", Vec3::Zero());
      bar.rotation = Eigen::AngleAxisd(-M_PI / 2.0, Vec3::UnitX()).toRotationMatrix();  // bar along local y
      parts.push_back(bar);
      if (g.contains("panel_half_extents")) {
        Primitive panel{K::Box};
        panel.half_extents = detail::vec3_from(g["panel_half_extents"]);
        panel.offset = v3("panel_offset", Vec3::Zero());
        parts.push_back(panel);
      }
      break;
    }
  }
  return parts;
}

inline SceneObject object_from_json(const nlohmann::json& j) {
  SceneObject o;
  o.id = j.at("id").get<std::string>();
  o.shape = parse_shape(j.at("shape").get<std::string>());
  o.parts = shape_parts(o.shape, j.at("geometry"));
  if (j.contains("position")) o.position = detail::vec3_from(j["position"]);
  if (j.contains("rpy")) o.orientation = rpy_matrix(detail::vec3_from(j["rpy"]));
  o.mobility = parse_mobility(j.value("mobility", std::string("fixed")));
  o.stiffness = j.value("contact_stiffness", o.stiffness);
  o.damping = j.value("contact_damping", o.damping);
  o.friction = j.value("friction", o.friction);
  o.tangential_damping = j.value("tangential_damping", o.tangential_damping);
  o.mass = j.value("mass", o.mass);
  o.linear_drag = j.value("linear_drag", o.linear_drag);
  o.release_time = j.value("release_time", o.release_time);
  if (j.contains("axis")) o.axis = detail::vec3_from(j["axis"]).normalized();
  if (j.contains("axis_point")) o.axis_point = detail::vec3_from(j["axis_point"]);
  o.axis_inertia = j.value("axis_inertia", o.axis_inertia);
  o.axis_viscous = j.value("axis_viscous", o.axis_viscous);
  o.axis_coulomb = j.value("axis_coulomb", o.axis_coulomb);
  o.axis_spring = j.value("axis_spring", o.axis_spring);
  o.axis_lo = j.value("axis_lo", o.axis_lo);
  o.axis_hi = j.value("axis_hi", o.axis_hi);
  o.validate();
  return o;
}

}  // namespace biohand

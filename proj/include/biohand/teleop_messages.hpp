#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biohand/harness.hpp"

namespace biohand {

inline constexpr int kTeleopSchemaVersion = 1;

namespace detail {
inline bool same(const Vec& a, const Vec& b) { return a.size() == b.size() && (a.array() == b.array()).all(); }
}  // namespace detail

struct FingertipSample {
  std::string name;
  Vec3 position = Vec3::Zero();
  bool operator==(const FingertipSample&) const = default;
};

struct ContactSample {
  std::string fingertip;
  std::string object;
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  double force = 0.0;
  bool operator==(const ContactSample&) const = default;
};

/// Running figures over the session (reset clears them).
struct LiveAggregates {
  long ticks = 0;
  double max_force = 0.0;
  double mean_force = 0.0;   // over (tick, fingertip) samples in contact
  long contact_samples = 0;
  bool operator==(const LiveAggregates&) const = default;
};

struct StateMessage {
  int version = kTeleopSchemaVersion;
  double t = 0.0;
  std::string controller;
  Vec q, q_d;
  std::vector<FingertipSample> fingertips;
  std::vector<ContactSample> contacts;
  Vec ks, kd, v;
  LiveAggregates aggregates;
  Vec limit_lo, limit_hi;

  bool operator==(const StateMessage& o) const {
    using detail::same;
    return version == o.version && t == o.t && controller == o.controller && same(q, o.q) && same(q_d, o.q_d) &&
           fingertips == o.fingertips && contacts == o.contacts && same(ks, o.ks) && same(kd, o.kd) &&
           same(v, o.v) && aggregates == o.aggregates && same(limit_lo, o.limit_lo) && same(limit_hi, o.limit_hi);
  }
};

struct CommandMessage {
  int version = kTeleopSchemaVersion;
  Vec q_d;
  std::optional<std::string> controller;
  bool reset = false;

  bool operator==(const CommandMessage& o) const {
    return version == o.version && detail::same(q_d, o.q_d) && controller == o.controller && reset == o.reset;
  }
};

namespace detail {

inline nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline const nlohmann::json& field(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ProtocolError(std::string("missing field '") + key + "'");
  return *it;
}

inline Vec json_vec(const nlohmann::json& j, const char* key) {
  const auto& a = field(j, key);
  if (!a.is_array()) throw ProtocolError(std::string("field '") + key + "' must be an array");
  Vec v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw ProtocolError(std::string("field '") + key + "' must hold numbers");
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  }
  return v;
}

inline Vec3 json_vec3(const nlohmann::json& j, const char* key) {
  const Vec v = json_vec(j, key);
  if (v.size() != 3) throw ProtocolError(std::string("field '") + key + "' must have 3 entries");
  return v;
}

inline nlohmann::json parse_envelope(const std::string& text, const char* type) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProtocolError(std::string("not JSON: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("message must be a JSON object");
  const auto& version = field(j, "version");
  if (!version.is_number_integer() || version.get<int>() != kTeleopSchemaVersion)
    throw ProtocolError("unsupported schema version " + version.dump());
  const auto& t = field(j, "type");
  if (!t.is_string() || t.get<std::string>() != type)
    throw ProtocolError("expected message type '" + std::string(type) + "', got " + t.dump());
  return j;
}

template <class T>
T get_as(const nlohmann::json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const nlohmann::json::type_error&) {
    throw ProtocolError(std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace detail

inline std::string encode_state(const StateMessage& m) {
  using detail::vec_json;
  nlohmann::json tips = nlohmann::json::array(), contacts = nlohmann::json::array();
  for (const auto& f : m.fingertips) tips.push_back({{"name", f.name}, {"position", vec_json(f.position)}});
  for (const auto& c : m.contacts)
    contacts.push_back({{"fingertip", c.fingertip},
                        {"object", c.object},
                        {"point", vec_json(c.point)},
                        {"normal", vec_json(c.normal)},
                        {"force", c.force}});
  const nlohmann::json j = {
      {"type", "state"},
      {"version", m.version},
      {"t", m.t},
      {"controller", m.controller},
      {"q", vec_json(m.q)},
      {"q_d", vec_json(m.q_d)},
      {"fingertips", tips},
      {"contacts", contacts},
      {"profiles", {{"ks", vec_json(m.ks)}, {"kd", vec_json(m.kd)}, {"v", vec_json(m.v)}}},
      {"aggregates",
       {{"ticks", m.aggregates.ticks},
        {"max_force", m.aggregates.max_force},
        {"mean_force", m.aggregates.mean_force},
        {"contact_samples", m.aggregates.contact_samples}}},
      {"limits", {{"lo", vec_json(m.limit_lo)}, {"hi", vec_json(m.limit_hi)}}}};
  return j.dump();
}

inline StateMessage decode_state(const std::string& text) {
  using namespace detail;
  const nlohmann::json j = parse_envelope(text, "state");
  StateMessage m;
  m.version = get_as<int>(j, "version");
  m.t = get_as<double>(j, "t");
  m.controller = get_as<std::string>(j, "controller");
  m.q = json_vec(j, "q");
  m.q_d = json_vec(j, "q_d");
  for (const auto& f : field(j, "fingertips")) m.fingertips.push_back({get_as<std::string>(f, "name"), json_vec3(f, "position")});
  for (const auto& c : field(j, "contacts"))
    m.contacts.push_back({get_as<std::string>(c, "fingertip"), get_as<std::string>(c, "object"), json_vec3(c, "point"),
                          json_vec3(c, "normal"), get_as<double>(c, "force")});
  const auto& p = field(j, "profiles");
  m.ks = json_vec(p, "ks");
  m.kd = json_vec(p, "kd");
  m.v = json_vec(p, "v");
  const auto& a = field(j, "aggregates");
  m.aggregates = {get_as<long>(a, "ticks"), get_as<double>(a, "max_force"), get_as<double>(a, "mean_force"),
                  get_as<long>(a, "contact_samples")};
  const auto& l = field(j, "limits");
  m.limit_lo = json_vec(l, "lo");
  m.limit_hi = json_vec(l, "hi");
  return m;
}

inline std::string encode_command(const CommandMessage& m) {
  nlohmann::json j = {{"type", "command"}, {"version", m.version}, {"q_d", detail::vec_json(m.q_d)}};
  if (m.controller) j["controller"] = *m.controller;
  if (m.reset) j["reset"] = true;
  return j.dump();
}

/// Structural decode only; the vector length is checked against the model by
/// TeleopLoop::post.
inline CommandMessage decode_command(const std::string& text) {
  using namespace detail;
  const nlohmann::json j = parse_envelope(text, "command");
  CommandMessage m;
  m.version = get_as<int>(j, "version");
  m.q_d = json_vec(j, "q_d");
  if (j.contains("controller")) {
    m.controller = get_as<std::string>(j, "controller");
    try {
      (void)parse_controller_type(*m.controller);
    } catch (const InvalidArgument& e) {
      throw ProtocolError(e.what());
    }
  }
  if (j.contains("reset")) m.reset = get_as<bool>(j, "reset");
  return m;
}

inline std::string encode_error(const std::string& message) {
  return nlohmann::json{{"type", "error"}, {"version", kTeleopSchemaVersion}, {"message", message}}.dump();
}

// ---------------------------------------------------------------------------

/// Simulation driven by teleop commands. The network side calls post(); the
/// control loop calls tick(). The only shared state is the latest-command slot.
class TeleopLoop {
 public:
  explicit TeleopLoop(const Scenario& sc, double broadcast_rate = 30.0)
      : reference_(std::make_shared<LiveReference>(sc.model, sc.initial_q)),
        sim_(sc, sc.default_controller, sc.seed, reference_),
        rate_(broadcast_rate) {
    if (!(broadcast_rate > 0.0)) throw InvalidArgument("TeleopLoop: broadcast rate must be > 0");
    sim_.keep_series(false);
  }

  /// Network side. Latest wins; a post replaces any command not yet consumed.
  void post(CommandMessage cmd) {
    if (cmd.q_d.size() != sim_.scenario().model.dofs())
      throw ProtocolError("q_d has " + std::to_string(cmd.q_d.size()) + " entries, model has " +
                          std::to_string(sim_.scenario().model.dofs()));
    if (!all_finite(cmd.q_d)) throw ProtocolError("q_d must be finite");
    std::lock_guard lock(mutex_);
    pending_ = std::move(cmd);
    ++posted_;
  }

  /// One control tick: consume at most one command, advance, and return a
  /// state message when a broadcast is due.
  std::optional<StateMessage> tick() {
    std::optional<CommandMessage> cmd;
    {
      std::lock_guard lock(mutex_);
      cmd.swap(pending_);
    }
    if (cmd) apply(*cmd);

    const auto& rec = sim_.tick();
    ++stream_ticks_;
    ++agg_.ticks;
    for (double f : rec.force)
      if (f > 0.0) {
        agg_.max_force = std::max(agg_.max_force, f);
        force_sum_ += f;
        ++agg_.contact_samples;
      }
    agg_.mean_force = agg_.contact_samples ? force_sum_ / static_cast<double>(agg_.contact_samples) : 0.0;

    const double t = stream_time();
    const auto slot = static_cast<long>(std::floor(t * rate_ + 1e-9));
    if (slot == last_slot_) return std::nullopt;
    last_slot_ = slot;
    return snapshot();
  }

  [[nodiscard]] StateMessage snapshot() const {
    const Scenario& sc = sim_.scenario();
    StateMessage m;
    m.t = stream_time();
    m.controller = std::string(to_string(sim_.controller().type()));
    m.q = sim_.state().q;
    m.q_d = sim_.last_reference().q_d.size() ? sim_.last_reference().q_d : reference_->sample_at(0.0).q_d;
    const auto tips = fingertip_positions(sc.model, sim_.state().q);
    for (Eigen::Index k = 0; k < tips.cols(); ++k)
      m.fingertips.push_back({sc.model.fingertips()[static_cast<std::size_t>(k)].name, tips.col(k)});
    for (const auto& c : sim_.last_contacts())
      m.contacts.push_back({sc.model.fingertips()[c.fingertip].name, c.object, c.point, c.normal, c.force_magnitude});
    const auto& p = sim_.last_output().profiles;
    const Vec zero = Vec::Zero(sc.model.dofs());
    m.ks = p.ks.size() ? p.ks : zero;
    m.kd = p.kd.size() ? p.kd : zero;
    m.v = p.v.size() ? p.v : zero;
    m.aggregates = agg_;
    m.limit_lo = sc.model.limit_lo();
    m.limit_hi = sc.model.limit_hi();
    return m;
  }

  /// Time since the session started; keeps increasing across resets.
  [[nodiscard]] double stream_time() const { return static_cast<double>(stream_ticks_) * sim_.scenario().ctrl_dt; }
  [[nodiscard]] long ticks() const { return stream_ticks_; }
  [[nodiscard]] std::uint64_t commands_posted() const {
    std::lock_guard lock(mutex_);
    return posted_;
  }
  [[nodiscard]] std::uint64_t commands_applied() const { return applied_; }
  [[nodiscard]] const Simulation& simulation() const { return sim_; }
  [[nodiscard]] double control_period() const { return sim_.scenario().ctrl_dt; }

 private:
  void apply(const CommandMessage& cmd) {
    if (cmd.reset) {
      sim_.reset();
      agg_ = {};
      force_sum_ = 0.0;
    }
    if (cmd.controller) {
      const ControllerType t = parse_controller_type(*cmd.controller);
      if (t != sim_.controller().type()) sim_.switch_controller(t);
    }
    reference_->submit(cmd.q_d);
    ++applied_;
  }

  std::shared_ptr<LiveReference> reference_;
  Simulation sim_;
  double rate_;
  long stream_ticks_ = 0;
  long last_slot_ = -1;
  LiveAggregates agg_;
  double force_sum_ = 0.0;

  mutable std::mutex mutex_;
  std::optional<CommandMessage> pending_;
  std::uint64_t posted_ = 0;
  std::uint64_t applied_ = 0;
};

}  // namespace biohand

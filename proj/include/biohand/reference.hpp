#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "biohand/hand_model.hpp"

namespace biohand {

/// Source of desired joint angles. Defined for every t >= 0.
class ReferenceProvider {
 public:
  virtual ~ReferenceProvider() = default;
  [[nodiscard]] virtual ReferenceSample sample_at(double t) const = 0;
  [[nodiscard]] virtual Eigen::Index dofs() const = 0;
};

using ReferencePtr = std::shared_ptr<const ReferenceProvider>;

inline ReferenceSample sample_at(const ReferenceProvider& provider, double t) { return provider.sample_at(t); }

// ---------------------------------------------------------------------------
// Recorded trajectories

struct Trajectory {
  std::vector<ReferenceSample> samples;
  int clamped_values = 0;  // entries pulled back into joint limits on load
};

/// Piecewise-linear playback with the first and last samples held.
class SampledReference final : public ReferenceProvider {
 public:
  explicit SampledReference(std::vector<ReferenceSample> samples) : samples_(std::move(samples)) {
    if (samples_.empty()) throw InvalidArgument("SampledReference: no samples");
    for (std::size_t i = 1; i < samples_.size(); ++i) {
      if (!(samples_[i].t > samples_[i - 1].t)) throw InvalidArgument("SampledReference: times must increase");
      require_size(samples_[i].q_d, samples_[0].q_d.size(), "SampledReference: sample");
    }
  }

  [[nodiscard]] ReferenceSample sample_at(double t) const override {
    if (t <= samples_.front().t) return {t, samples_.front().q_d};
    if (t >= samples_.back().t) return {t, samples_.back().q_d};
    auto hi = std::upper_bound(samples_.begin(), samples_.end(), t,
                               [](double x, const ReferenceSample& s) { return x < s.t; });
    auto lo = hi - 1;
    const double a = (t - lo->t) / (hi->t - lo->t);
    const Vec q = (1.0 - a) * lo->q_d + a * hi->q_d;
    return {t, q.cwiseMax(lo->q_d.cwiseMin(hi->q_d)).cwiseMin(lo->q_d.cwiseMax(hi->q_d))};
  }

  [[nodiscard]] Eigen::Index dofs() const override { return samples_.front().q_d.size(); }
  [[nodiscard]] const std::vector<ReferenceSample>& samples() const { return samples_; }

 private:
  std::vector<ReferenceSample> samples_;
};

inline std::string trajectory_header(Eigen::Index dofs) {
  std::string h = "t";
  for (Eigen::Index i = 0; i < dofs; ++i) h += ",q_" + std::to_string(i);
  return h;
}

/// CSV, header `t,q_0,...`, SI units, shortest round-trip decimal formatting.
inline void save_trajectory(const std::vector<ReferenceSample>& samples, std::ostream& out) {
  if (samples.empty()) throw InvalidArgument("save_trajectory: no samples");
  out << trajectory_header(samples.front().q_d.size()) << '\n';
  char buf[32];
  for (const auto& s : samples) {
    std::snprintf(buf, sizeof buf, "%.17g", s.t);
    out << buf;
    for (Eigen::Index i = 0; i < s.q_d.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", s.q_d[i]);
      out << ',' << buf;
    }
    out << '\n';
  }
}

inline void save_trajectory(const std::vector<ReferenceSample>& samples, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write trajectory " + path);
  save_trajectory(samples, out);
}

namespace detail {
inline double parse_double(const std::string& cell, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != cell.size())
    throw FormatError("trajectory line " + std::to_string(line) + ": bad number '" + cell + "'");
  return v;
}
}  // namespace detail

/// Parse a trajectory and clamp into the model's joint limits.
inline Trajectory load_trajectory(std::istream& in, const HandModel& model) {
  Trajectory traj;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  const auto n = static_cast<std::size_t>(model.dofs());
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (!header) {
      if (cells.empty() || cells[0] != "t") throw FormatError("trajectory: missing 't,q_0,...' header");
      if (cells.size() != n + 1)
        throw FormatError("trajectory: header has " + std::to_string(cells.size() - 1) + " joint columns, model has " +
                          std::to_string(n));
      header = true;
      continue;
    }
    if (cells.size() != n + 1)
      throw FormatError("trajectory line " + std::to_string(lineno) + ": expected " + std::to_string(n + 1) +
                        " columns, got " + std::to_string(cells.size()));
    ReferenceSample s;
    s.t = detail::parse_double(cells[0], lineno);
    s.q_d.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) s.q_d[static_cast<Eigen::Index>(i)] = detail::parse_double(cells[i + 1], lineno);
    if (!traj.samples.empty() && !(s.t > traj.samples.back().t))
      throw FormatError("trajectory line " + std::to_string(lineno) + ": time is not strictly increasing");
    const Vec clamped = model.clamp(s.q_d);
    traj.clamped_values += static_cast<int>((clamped.array() != s.q_d.array()).count());
    s.q_d = clamped;
    traj.samples.push_back(std::move(s));
  }
  if (traj.samples.empty()) throw FormatError("trajectory: no samples");
  return traj;
}

inline Trajectory load_trajectory(const std::string& path, const HandModel& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open trajectory " + path);
  return load_trajectory(in, model);
}

// ---------------------------------------------------------------------------
// Scripted generators

/// q_a before t_switch, q_b from t_switch on.
class StepReference final : public ReferenceProvider {
 public:
  StepReference(Vec q_a, Vec q_b, double t_switch) : a_(std::move(q_a)), b_(std::move(q_b)), t_(t_switch) {
    require_size(b_, a_.size(), "StepReference: q_b");
  }
  [[nodiscard]] ReferenceSample sample_at(double t) const override { return {t, t < t_ ? a_ : b_}; }
  [[nodiscard]] Eigen::Index dofs() const override { return a_.size(); }

 private:
  Vec a_, b_;
  double t_;
};

/// Minimum-jerk blend 10 s^3 - 15 s^4 + 6 s^5 of the normalized time s in [0, 1].
inline double min_jerk(double s) {
  s = std::clamp(s, 0.0, 1.0);
  const double s3 = s * s * s;
  return s3 * (10.0 - 15.0 * s + 6.0 * s * s);
}

struct Waypoint {
  double t = 0.0;
  Vec q;
};

/// Minimum-jerk segments between consecutive waypoints, holding the ends.
class WaypointReference final : public ReferenceProvider {
 public:
  explicit WaypointReference(std::vector<Waypoint> points) : points_(std::move(points)) {
    if (points_.empty()) throw InvalidArgument("WaypointReference: no waypoints");
    for (std::size_t i = 1; i < points_.size(); ++i) {
      if (!(points_[i].t >= points_[i - 1].t)) throw InvalidArgument("WaypointReference: times must not decrease");
      require_size(points_[i].q, points_[0].q.size(), "WaypointReference: waypoint");
    }
  }

  [[nodiscard]] ReferenceSample sample_at(double t) const override {
    if (t <= points_.front().t) return {t, points_.front().q};
    for (std::size_t i = 1; i < points_.size(); ++i) {
      const Waypoint& a = points_[i - 1];
      const Waypoint& b = points_[i];
      if (t < b.t) {
        const double s = (t - a.t) / (b.t - a.t);
        // rounding near s = 1 can overshoot; stay between the endpoints
        const Vec q = a.q + (b.q - a.q) * min_jerk(s);
        return {t, q.cwiseMax(a.q.cwiseMin(b.q)).cwiseMin(a.q.cwiseMax(b.q))};
      }
    }
    return {t, points_.back().q};
  }

  [[nodiscard]] Eigen::Index dofs() const override { return points_.front().q.size(); }
  [[nodiscard]] const std::vector<Waypoint>& waypoints() const { return points_; }

 private:
  std::vector<Waypoint> points_;
};

inline ReferencePtr min_jerk_reference(Vec q_a, Vec q_b, double duration, double t0 = 0.0) {
  if (!(duration > 0.0)) throw InvalidArgument("min_jerk_reference: duration must be > 0");
  return std::make_shared<WaypointReference>(
      std::vector<Waypoint>{{t0, std::move(q_a)}, {t0 + duration, std::move(q_b)}});
}

/// Sample a provider on a uniform grid, e.g. to write it out as a trajectory file.
inline std::vector<ReferenceSample> tabulate(const ReferenceProvider& p, double duration, double dt) {
  if (!(dt > 0.0) || !(duration >= 0.0)) throw InvalidArgument("tabulate: need dt > 0 and duration >= 0");
  std::vector<ReferenceSample> out;
  const auto steps = static_cast<long>(std::llround(duration / dt));
  for (long k = 0; k <= steps; ++k) out.push_back(p.sample_at(static_cast<double>(k) * dt));
  return out;
}

// ---------------------------------------------------------------------------
// Live teleoperation channel

/// Latest-value mailbox between one producer (network) and one consumer
/// (control loop). Posting overwrites; nothing queues.
class CommandMailbox {
 public:
  void post(Vec q_d) {
    std::lock_guard lock(mutex_);
    latest_ = std::move(q_d);
    ++posted_;
  }

  /// Latest value and how many posts have happened so far.
  [[nodiscard]] std::pair<std::optional<Vec>, std::uint64_t> peek() const {
    std::lock_guard lock(mutex_);
    return {latest_, posted_};
  }

 private:
  mutable std::mutex mutex_;
  std::optional<Vec> latest_;
  std::uint64_t posted_ = 0;
};

/// Reference fed by a teleop client. Values are clamped to the joint limits on
/// ingest. Before any command arrives the rest pose is held.
class LiveReference final : public ReferenceProvider {
 public:
  LiveReference(const HandModel& model, Vec rest)
      : lo_(model.limit_lo()), hi_(model.limit_hi()), rest_(model.clamp(rest)) {}

  explicit LiveReference(const HandModel& model) : LiveReference(model, Vec::Zero(model.dofs())) {}

  /// Clamp and post. Throws on a length mismatch.
  Vec submit(const Vec& q_d) {
    require_size(q_d, lo_.size(), "LiveReference::submit");
    Vec clamped = q_d.cwiseMax(lo_).cwiseMin(hi_);
    mailbox_.post(clamped);
    return clamped;
  }

  [[nodiscard]] ReferenceSample sample_at(double t) const override {
    auto [latest, count] = mailbox_.peek();
    (void)count;
    return {t, latest ? *latest : rest_};
  }

  [[nodiscard]] Eigen::Index dofs() const override { return rest_.size(); }
  [[nodiscard]] std::uint64_t posted() const { return mailbox_.peek().second; }

 private:
  Vec lo_, hi_, rest_;
  CommandMailbox mailbox_;
};

}  // namespace biohand

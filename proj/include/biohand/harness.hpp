#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biohand/dynamics.hpp"
#include "biohand/scenario.hpp"

namespace biohand {

/// One control tick of a run, sampled at the end of the tick.
struct TickRecord {
  long tick = 0;
  double t = 0.0;
  double e_rms = 0.0;
  double eps_rms = 0.0;
  double ks_mean = 0.0;
  double v_mean = 0.0;
  double articulation = 0.0;                 // task object coordinate
  Vec3 object_offset = Vec3::Zero();         // task object translation (free bodies)
  std::vector<double> force;                 // per fingertip, N (0 when not touching)
  std::vector<std::optional<Vec3>> point;    // per fingertip contact point
};

struct Aggregates {
  double max_force = 0.0;
  std::optional<double> mean_force;          // over (tick, fingertip) samples in contact
  std::optional<double> dispersion;          // m, absent without contacts
  double articulation_progress = 0.0;
  long contact_transitions = 0;              // per-fingertip make/break count
  std::optional<double> first_contact_time;
  double transition_rate = 0.0;              // transitions per second after first contact
  bool success = false;
};

struct MetricsRecord {
  std::string scenario;
  std::string controller;
  std::uint64_t seed = 0;
  std::vector<std::string> fingertips;
  std::vector<TickRecord> series;
  Aggregates aggregates;
  double mean_step_wall_time = 0.0;          // s, measured; kept out of the metrics CSV
  long controller_steps = 0;
  std::optional<std::string> fault;
};

/// RMS distance of contact points from their per-fingertip centroid.
/// Absent for an empty event list.
inline std::optional<double> contact_dispersion(const std::vector<ContactEvent>& events) {
  if (events.empty()) return std::nullopt;
  std::map<int, std::pair<Vec3, int>> centroid;
  for (const auto& e : events) {
    auto& [sum, n] = centroid.try_emplace(e.fingertip, Vec3::Zero(), 0).first->second;
    sum += e.point;
    ++n;
  }
  double sq = 0.0;
  for (const auto& e : events) {
    const auto& [sum, n] = centroid.at(e.fingertip);
    sq += (e.point - sum / n).squaredNorm();
  }
  return std::sqrt(sq / static_cast<double>(events.size()));
}

/// Contact events reconstructed from the per-tick series.
inline std::vector<ContactEvent> series_events(const std::vector<TickRecord>& series) {
  std::vector<ContactEvent> out;
  for (const auto& r : series)
    for (std::size_t k = 0; k < r.point.size(); ++k)
      if (r.point[k]) {
        ContactEvent e;
        e.time = r.t;
        e.fingertip = static_cast<int>(k);
        e.point = *r.point[k];
        e.force_magnitude = r.force[k];
        out.push_back(e);
      }
  return out;
}

/// Everything in Aggregates except `success` follows from the series alone.
inline Aggregates aggregate(const std::vector<TickRecord>& series) {
  Aggregates a;
  double sum = 0.0;
  long samples = 0;
  for (const auto& r : series)
    for (double f : r.force) {
      a.max_force = std::max(a.max_force, f);
      if (f > 0.0) {
        sum += f;
        ++samples;
      }
    }
  if (samples > 0) a.mean_force = sum / static_cast<double>(samples);
  a.dispersion = contact_dispersion(series_events(series));
  if (!series.empty()) a.articulation_progress = series.back().articulation - series.front().articulation;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& r = series[i];
    bool touching = std::any_of(r.force.begin(), r.force.end(), [](double f) { return f > 0.0; });
    if (touching && !a.first_contact_time) a.first_contact_time = r.t;
    if (i == 0) continue;
    for (std::size_t k = 0; k < r.force.size(); ++k)
      if ((r.force[k] > 0.0) != (series[i - 1].force[k] > 0.0)) ++a.contact_transitions;
  }
  if (a.first_contact_time && series.back().t > *a.first_contact_time)
    a.transition_rate = static_cast<double>(a.contact_transitions) / (series.back().t - *a.first_contact_time);
  return a;
}

/// Task outcome from the recorded run.
inline bool success_check(const Scenario& sc, const JointState& final_state, const MetricsRecord& metrics) {
  (void)final_state;
  const auto& s = sc.success;
  const auto& series = metrics.series;
  if (series.empty() || metrics.fault) return false;
  std::vector<const TickRecord*> window;
  for (const auto& r : series)
    if (r.t >= s.window_start) window.push_back(&r);
  auto touching = [](const TickRecord& r) {
    return static_cast<int>(std::count_if(r.force.begin(), r.force.end(), [](double f) { return f > 0.0; }));
  };
  if (s.kind == "grasp") {
    if (window.empty()) return false;
    const double drop = (window.back()->object_offset - window.front()->object_offset).norm();
    // at least 95 % of the window held with enough fingertips
    const long held = std::count_if(window.begin(), window.end(),
                                    [&](const TickRecord* r) { return touching(*r) >= s.min_contacts; });
    return drop < s.max_drop && static_cast<double>(held) >= 0.95 * static_cast<double>(window.size());
  }
  if (s.kind == "articulation") return series.back().articulation > s.target;
  if (s.kind == "touch") {
    if (window.empty()) return false;
    long in_contact = 0, samples = 0;
    double sum = 0.0;
    for (const auto* r : window) {
      if (touching(*r) > 0) ++in_contact;
      for (double f : r->force)
        if (f > 0.0) {
          sum += f;
          ++samples;
        }
    }
    const double fraction = static_cast<double>(in_contact) / static_cast<double>(window.size());
    return fraction >= s.min_contact_fraction && samples > 0 && sum / static_cast<double>(samples) < s.force_ceiling;
  }
  return false;
}

// ---------------------------------------------------------------------------

/// Per-tick controller profile row for the profile log.
struct ProfileRow {
  long tick = 0;
  double t = 0.0;
  CompliantProfiles profiles;
  TrackingError error;
  Vec tau;
};

using ProfileSink = std::function<void(const ProfileRow&)>;

/// One closed-loop run: control at ctrl_dt with the torque held over the
/// sim_dt substeps in between.
class Simulation {
 public:
  Simulation(const Scenario& sc, ControllerType type, std::uint64_t seed, ReferencePtr reference = nullptr)
      : sc_(sc),
        scene_(perturbed_scene(sc.scene, sc.perturbation, seed)),
        controller_(make_controller(sc, type)),
        reference_(reference ? std::move(reference) : make_reference(sc, scene_)),
        scene_state_(initial_scene_state(scene_)) {
    sc.validate();
    if (reference_->dofs() != sc.model.dofs()) throw InvalidArgument("reference/model DOF mismatch");
    state_.q = sc.model.clamp(sc.initial_q);
    state_.q_dot = Vec::Zero(sc.model.dofs());
    state_.t = 0.0;
    task_object_ = find_task_object();
    metrics_.scenario = sc.name;
    metrics_.controller = std::string(to_string(type));
    metrics_.seed = seed;
    for (const auto& f : sc.model.fingertips()) metrics_.fingertips.push_back(f.name);
  }

  /// One control tick. Throws ControllerFault / SimulationFault.
  const TickRecord& tick() {
    const double dt = sc_.ctrl_dt;
    ReferenceSample ref = reference_->sample_at(state_.t);
    ref.q_d = sc_.model.clamp(ref.q_d);
    last_ref_ = ref;

    const auto t0 = std::chrono::steady_clock::now();
    ControlOutput out = controller_.step(state_, ref, dt);
    const auto t1 = std::chrono::steady_clock::now();
    wall_ += std::chrono::duration<double>(t1 - t0).count();
    ++metrics_.controller_steps;

    for (int s = 0; s < sc_.substeps(); ++s) {
      StepResult r = step_dynamics(sc_.model, state_, out.command.tau, scene_, scene_state_, sc_.sim_dt);
      state_ = std::move(r.state);
      scene_state_ = std::move(r.scene_state);
      last_contacts_ = std::move(r.contacts);
    }
    state_.t = static_cast<double>(ticks_ + 1) * dt;  // no drift from repeated sim_dt sums

    TickRecord rec;
    rec.tick = ticks_;
    rec.t = state_.t;
    const double n = static_cast<double>(sc_.model.dofs());
    rec.e_rms = std::sqrt(out.error.e.squaredNorm() / n);
    rec.eps_rms = out.error.eps.size() ? std::sqrt(out.error.eps.squaredNorm() / n) : 0.0;
    rec.ks_mean = out.profiles.ks.mean();
    rec.v_mean = out.profiles.v.mean();
    if (task_object_ >= 0) {
      rec.articulation = articulation(scene_.objects[task_object_], scene_state_[task_object_]);
      rec.object_offset = scene_state_[task_object_].offset;
    }
    const std::size_t tips = sc_.model.fingertips().size();
    rec.force.assign(tips, 0.0);
    rec.point.assign(tips, std::nullopt);
    std::vector<double> strongest(tips, -1.0);
    for (const auto& c : last_contacts_) {
      rec.force[c.fingertip] += c.force_magnitude;
      if (c.force_magnitude > strongest[c.fingertip]) {
        strongest[c.fingertip] = c.force_magnitude;
        rec.point[c.fingertip] = c.point;
      }
    }
    if (profile_sink_) profile_sink_({ticks_, state_.t, out.profiles, out.error, out.command.tau});
    last_output_ = std::move(out);
    ++ticks_;
    if (!keep_series_) metrics_.series.clear();
    metrics_.series.push_back(std::move(rec));
    return metrics_.series.back();
  }

  /// Close the record: aggregates, success, timing.
  MetricsRecord finish() {
    metrics_.aggregates = aggregate(metrics_.series);
    metrics_.aggregates.success = success_check(sc_, state_, metrics_);
    metrics_.mean_step_wall_time = metrics_.controller_steps ? wall_ / static_cast<double>(metrics_.controller_steps) : 0.0;
    return metrics_;
  }

  void set_profile_sink(ProfileSink sink) { profile_sink_ = std::move(sink); }
  void record_fault(std::string what) { metrics_.fault = std::move(what); }
  /// Off: only the latest tick is kept (long interactive sessions).
  void keep_series(bool keep) { keep_series_ = keep; }

  /// Swap the control strategy mid-run (teleop); adaptive state restarts.
  void switch_controller(ControllerType type) {
    controller_ = make_controller(sc_, type);
    metrics_.controller = std::string(to_string(type));
  }

  /// Back to the initial configuration with a fresh controller and record.
  void reset() {
    state_.q = sc_.model.clamp(sc_.initial_q);
    state_.q_dot.setZero();
    state_.t = 0.0;
    scene_state_ = initial_scene_state(scene_);
    controller_.reset();
    ticks_ = 0;
    wall_ = 0.0;
    metrics_.series.clear();
    metrics_.controller_steps = 0;
    last_contacts_.clear();
  }

  [[nodiscard]] const Scenario& scenario() const { return sc_; }
  [[nodiscard]] const Scene& scene() const { return scene_; }
  [[nodiscard]] const SceneState& scene_state() const { return scene_state_; }
  [[nodiscard]] const JointState& state() const { return state_; }
  [[nodiscard]] const ReferenceSample& last_reference() const { return last_ref_; }
  [[nodiscard]] const ControlOutput& last_output() const { return last_output_; }
  [[nodiscard]] const std::vector<ContactEvent>& last_contacts() const { return last_contacts_; }
  [[nodiscard]] const MetricsRecord& metrics() const { return metrics_; }
  [[nodiscard]] long ticks_done() const { return ticks_; }
  [[nodiscard]] const Controller& controller() const { return controller_; }

 private:
  int find_task_object() const {
    std::string id = sc_.success.object;
    if (id.empty() && sc_.reference.kind == "scripted") id = sc_.reference.script.object;
    for (std::size_t i = 0; i < scene_.objects.size(); ++i)
      if (scene_.objects[i].id == id) return static_cast<int>(i);
    return scene_.objects.empty() ? -1 : 0;
  }

  Scenario sc_;
  Scene scene_;
  Controller controller_;
  ReferencePtr reference_;
  JointState state_;
  SceneState scene_state_;
  ReferenceSample last_ref_;
  ControlOutput last_output_;
  std::vector<ContactEvent> last_contacts_;
  MetricsRecord metrics_;
  ProfileSink profile_sink_;
  int task_object_ = -1;
  bool keep_series_ = true;
  long ticks_ = 0;
  double wall_ = 0.0;
};

/// Full closed-loop run. A fault stops the run and is reported in the record
/// together with the metrics gathered so far.
inline MetricsRecord run_scenario(const Scenario& sc, ControllerType type, std::uint64_t seed,
                                  ProfileSink profile_sink = nullptr) {
  Simulation sim(sc, type, seed);
  if (profile_sink) sim.set_profile_sink(std::move(profile_sink));
  const long n = sc.ticks();
  try {
    for (long k = 0; k < n; ++k) sim.tick();
  } catch (const ControllerFault& e) {
    sim.record_fault(std::string("controller-fault: ") + e.what());
  } catch (const SimulationFault& e) {
    sim.record_fault(std::string("simulation-fault: ") + e.what());
  }
  return sim.finish();
}

inline MetricsRecord run_scenario(const Scenario& sc) { return run_scenario(sc, sc.default_controller, sc.seed); }

// ---------------------------------------------------------------------------
// Controller comparison

struct ComparisonRow {
  std::string controller;
  int runs = 0;
  double mean_max_force = 0.0;
  double max_max_force = 0.0;
  double mean_mean_force = 0.0;      // mean over runs with contact
  double max_mean_force = 0.0;
  double mean_dispersion = 0.0;      // mean over runs with contact
  double mean_transition_rate = 0.0;
  double success_rate = 0.0;
  int faults = 0;
  int rank_by_max = 0;               // 1 = lowest force
  int rank_by_mean = 0;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
  std::vector<MetricsRecord> runs;  // ordered by (controller, seed)
};

inline ComparisonRow summarize(const std::string& controller, const std::vector<MetricsRecord>& runs) {
  ComparisonRow row;
  row.controller = controller;
  row.runs = static_cast<int>(runs.size());
  int with_mean = 0, with_disp = 0, ok = 0;
  for (const auto& r : runs) {
    const Aggregates& a = r.aggregates;
    row.mean_max_force += a.max_force;
    row.max_max_force = std::max(row.max_max_force, a.max_force);
    if (a.mean_force) {
      row.mean_mean_force += *a.mean_force;
      row.max_mean_force = std::max(row.max_mean_force, *a.mean_force);
      ++with_mean;
    }
    if (a.dispersion) {
      row.mean_dispersion += *a.dispersion;
      ++with_disp;
    }
    row.mean_transition_rate += a.transition_rate;
    if (a.success) ++ok;
    if (r.fault) ++row.faults;
  }
  if (!runs.empty()) {
    const double n = static_cast<double>(runs.size());
    row.mean_max_force /= n;
    row.mean_transition_rate /= n;
    row.success_rate = ok / n;
  }
  if (with_mean) row.mean_mean_force /= with_mean;
  if (with_disp) row.mean_dispersion /= with_disp;
  return row;
}

/// Runs every controller over seeds 0..repeats-1. Runs may execute on
/// `workers` threads; the result order is (controller, seed) regardless.
inline ComparisonTable compare_controllers(const Scenario& sc, const std::vector<ControllerType>& controllers,
                                           int repeats, int workers = 1) {
  if (repeats < 1) throw InvalidArgument("compare_controllers: repeats must be >= 1");
  if (controllers.empty()) throw InvalidArgument("compare_controllers: no controllers");
  struct Job {
    ControllerType type;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (ControllerType t : controllers)
    for (int s = 0; s < repeats; ++s) jobs.push_back({t, static_cast<std::uint64_t>(s)});

  ComparisonTable table;
  table.runs.resize(jobs.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) table.runs[i] = run_scenario(sc, jobs[i].type, jobs[i].seed);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::future<void>> pool;
    for (int w = 0; w < workers; ++w)
      pool.push_back(std::async(std::launch::async, [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++)
          table.runs[i] = run_scenario(sc, jobs[i].type, jobs[i].seed);
      }));
    for (auto& f : pool) f.get();
  }

  for (std::size_t c = 0; c < controllers.size(); ++c) {
    std::vector<MetricsRecord> runs(table.runs.begin() + static_cast<long>(c * repeats),
                                    table.runs.begin() + static_cast<long>((c + 1) * repeats));
    table.rows.push_back(summarize(std::string(to_string(controllers[c])), runs));
  }
  auto rank = [&](auto key, auto setter) {
    std::vector<std::size_t> idx(table.rows.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return key(table.rows[a]) < key(table.rows[b]); });
    for (std::size_t r = 0; r < idx.size(); ++r) setter(table.rows[idx[r]], static_cast<int>(r + 1));
  };
  rank([](const ComparisonRow& r) { return r.mean_max_force; }, [](ComparisonRow& r, int k) { r.rank_by_max = k; });
  rank([](const ComparisonRow& r) { return r.mean_mean_force; }, [](ComparisonRow& r, int k) { r.rank_by_mean = k; });
  return table;
}

// ---------------------------------------------------------------------------
// CSV / summary output. Fixed formatting so identical runs give identical bytes.

namespace detail {
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}
inline std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }
}  // namespace detail

inline void write_metrics_csv(const MetricsRecord& m, std::ostream& out) {
  out << "tick,t,e_rms,eps_rms,ks_mean,v_mean,articulation,object_dx,object_dy,object_dz";
  for (const auto& f : m.fingertips) out << ",f_" << f << ",px_" << f << ",py_" << f << ",pz_" << f;
  out << '\n';
  using detail::fmt;
  for (const auto& r : m.series) {
    out << r.tick << ',' << fmt(r.t) << ',' << fmt(r.e_rms) << ',' << fmt(r.eps_rms) << ',' << fmt(r.ks_mean) << ','
        << fmt(r.v_mean) << ',' << fmt(r.articulation) << ',' << fmt(r.object_offset.x()) << ','
        << fmt(r.object_offset.y()) << ',' << fmt(r.object_offset.z());
    for (std::size_t k = 0; k < r.force.size(); ++k) {
      out << ',' << fmt(r.force[k]);
      if (r.point[k])
        out << ',' << fmt(r.point[k]->x()) << ',' << fmt(r.point[k]->y()) << ',' << fmt(r.point[k]->z());
      else
        out << ",,,";
    }
    out << '\n';
  }
  const Aggregates& a = m.aggregates;
  out << "# scenario=" << m.scenario << "\n# controller=" << m.controller << "\n# seed=" << m.seed
      << "\n# ticks=" << m.series.size() << "\n# max_force=" << fmt(a.max_force)
      << "\n# mean_force=" << detail::fmt_opt(a.mean_force) << "\n# contact_dispersion=" << detail::fmt_opt(a.dispersion)
      << "\n# articulation_progress=" << fmt(a.articulation_progress)
      << "\n# contact_transitions=" << a.contact_transitions << "\n# transition_rate=" << fmt(a.transition_rate)
      << "\n# first_contact_time=" << detail::fmt_opt(a.first_contact_time)
      << "\n# success=" << (a.success ? "true" : "false") << '\n';
  if (m.fault) out << "# fault=" << m.fault->substr(0, m.fault->find('\n')) << '\n';
}

inline nlohmann::json summary_json(const MetricsRecord& m) {
  const Aggregates& a = m.aggregates;
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json j = {{"scenario", m.scenario},
                      {"controller", m.controller},
                      {"seed", m.seed},
                      {"ticks", m.series.size()},
                      {"max_force", a.max_force},
                      {"mean_force", opt(a.mean_force)},
                      {"contact_dispersion", opt(a.dispersion)},
                      {"articulation_progress", a.articulation_progress},
                      {"contact_transitions", a.contact_transitions},
                      {"transition_rate", a.transition_rate},
                      {"first_contact_time", opt(a.first_contact_time)},
                      {"success", a.success},
                      {"mean_step_wall_time", m.mean_step_wall_time},
                      {"controller_steps", m.controller_steps}};
  j["fault"] = m.fault ? nlohmann::json(*m.fault) : nlohmann::json(nullptr);
  return j;
}

inline void write_profile_header(std::ostream& out, int dofs) {
  out << "tick,t";
  for (const char* p : {"Ks", "Kd", "v", "e", "eps", "tau"})
    for (int i = 0; i < dofs; ++i) out << ',' << p << '_' << i;
  out << '\n';
}

inline void write_profile_row(std::ostream& out, const ProfileRow& r) {
  using detail::fmt;
  out << r.tick << ',' << fmt(r.t);
  for (const Vec* v : {&r.profiles.ks, &r.profiles.kd, &r.profiles.v, &r.error.e, &r.error.eps, &r.tau})
    for (Eigen::Index i = 0; i < v->size(); ++i) out << ',' << fmt((*v)[i]);
  out << '\n';
}

inline void write_comparison_csv(const ComparisonTable& t, std::ostream& out) {
  using detail::fmt;
  out << "controller,runs,mean_max_force,max_max_force,mean_mean_force,max_mean_force,mean_dispersion,"
         "mean_transition_rate,success_rate,faults,rank_by_max,rank_by_mean\n";
  for (const auto& r : t.rows)
    out << r.controller << ',' << r.runs << ',' << fmt(r.mean_max_force) << ',' << fmt(r.max_max_force) << ','
        << fmt(r.mean_mean_force) << ',' << fmt(r.max_mean_force) << ',' << fmt(r.mean_dispersion) << ','
        << fmt(r.mean_transition_rate) << ',' << fmt(r.success_rate) << ',' << r.faults << ',' << r.rank_by_max << ','
        << r.rank_by_mean << '\n';
}

}  // namespace biohand

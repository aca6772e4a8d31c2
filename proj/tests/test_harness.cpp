#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "biohand/harness.hpp"

using namespace biohand;

namespace {

const std::string kScenarios = std::string(BIOHAND_SOURCE_DIR) + "/scenarios/";

Scenario shipped(const std::string& name) { return load_scenario(kScenarios + name + ".json"); }

std::string csv_of(const MetricsRecord& m) {
  std::ostringstream out;
  write_metrics_csv(m, out);
  return out.str();
}

ContactEvent at(int tip, Vec3 p) {
  ContactEvent e;
  e.fingertip = tip;
  e.point = p;
  return e;
}

TickRecord tick_with(double t, std::vector<double> force, double articulation = 0.0, Vec3 offset = Vec3::Zero()) {
  TickRecord r;
  r.t = t;
  r.force = std::move(force);
  r.point.assign(r.force.size(), std::nullopt);
  r.articulation = articulation;
  r.object_offset = offset;
  return r;
}

}  // namespace

TEST(Dispersion, IdenticalPointsGiveZero) {
  EXPECT_EQ(*contact_dispersion({at(0, {1, 2, 3}), at(0, {1, 2, 3}), at(0, {1, 2, 3})}), 0.0);
}

TEST(Dispersion, TwoPointsTwoDApartGiveD) {
  const double d = 0.0125;
  EXPECT_NEAR(*contact_dispersion({at(1, {0, 0, 0}), at(1, {2 * d, 0, 0})}), d, 1e-15);
}

TEST(Dispersion, CentroidIsPerFingertip) {
  EXPECT_EQ(*contact_dispersion({at(0, {0, 0, 0}), at(1, {5, 5, 5})}), 0.0);
}

TEST(Dispersion, EmptyIsAbsent) { EXPECT_FALSE(contact_dispersion({}).has_value()); }

TEST(DispersionProperty, TranslationInvariant) {
  std::vector<ContactEvent> ev{at(0, {0.01, 0.02, 0.0}), at(0, {0.015, 0.0, 0.01}), at(2, {0.3, 0.1, 0.2}),
                               at(2, {0.31, 0.12, 0.2}), at(2, {0.29, 0.1, 0.25})};
  const double base = *contact_dispersion(ev);
  for (auto& e : ev) e.point += Vec3(0.125, -0.25, 0.5);
  EXPECT_NEAR(*contact_dispersion(ev), base, 1e-15);
  EXPECT_GT(base, 0.0);
}

TEST(Aggregates, HandBuiltSeries) {
  const std::vector<TickRecord> s{tick_with(0.01, {0.0, 0.0}, 0.1), tick_with(0.02, {1.0, 0.0}, 0.2),
                                  tick_with(0.03, {3.0, 2.0}, 0.3), tick_with(0.04, {0.0, 2.0}, 0.5),
                                  tick_with(0.05, {0.0, 0.0}, 0.4)};
  const Aggregates a = aggregate(s);
  EXPECT_EQ(a.max_force, 3.0);
  EXPECT_DOUBLE_EQ(*a.mean_force, (1.0 + 3.0 + 2.0 + 2.0) / 4.0);
  EXPECT_EQ(a.contact_transitions, 4);  // tip0 on, tip1 on, tip0 off, tip1 off
  EXPECT_EQ(*a.first_contact_time, 0.02);
  EXPECT_DOUBLE_EQ(a.transition_rate, 4.0 / (0.05 - 0.02));
  EXPECT_DOUBLE_EQ(a.articulation_progress, 0.4 - 0.1);
  EXPECT_FALSE(a.dispersion.has_value());
}

TEST(AggregatesProperty, RecomputableFromRunSeries) {
  const MetricsRecord m = run_scenario(shipped("touch_mouse"), ControllerType::Fixed, 2);
  double max_f = 0.0, sum = 0.0;
  long n = 0, transitions = 0;
  for (std::size_t i = 0; i < m.series.size(); ++i) {
    for (std::size_t k = 0; k < m.series[i].force.size(); ++k) {
      const double f = m.series[i].force[k];
      max_f = std::max(max_f, f);
      if (f > 0.0) sum += f, ++n;
      if (i > 0 && (f > 0.0) != (m.series[i - 1].force[k] > 0.0)) ++transitions;
    }
  }
  EXPECT_EQ(m.aggregates.max_force, max_f);
  ASSERT_TRUE(m.aggregates.mean_force.has_value());
  EXPECT_NEAR(*m.aggregates.mean_force, sum / n, 1e-12 * sum / n);
  EXPECT_EQ(m.aggregates.contact_transitions, transitions);
  EXPECT_GT(n, 0);
  EXPECT_EQ(m.series.size(), static_cast<std::size_t>(shipped("touch_mouse").ticks()));
  EXPECT_EQ(m.controller_steps, static_cast<long>(m.series.size()));
  EXPECT_GT(m.mean_step_wall_time, 0.0);
}

TEST(RunScenario, ZeroDurationGivesEmptySeriesAndNoSuccess) {
  Scenario sc = shipped("touch_mouse");
  sc.duration = 0.0;
  const MetricsRecord m = run_scenario(sc, ControllerType::Adaptive, 0);
  EXPECT_TRUE(m.series.empty());
  EXPECT_FALSE(m.aggregates.success);
  EXPECT_EQ(m.aggregates.max_force, 0.0);
  EXPECT_FALSE(m.aggregates.mean_force.has_value());
}

TEST(RunScenario, ShippedScenariosByteIdenticalAcrossRuns) {
  for (const char* name : {"grasp_ball", "open_door", "turn_cap", "touch_mouse"}) {
    const Scenario sc = shipped(name);
    EXPECT_EQ(csv_of(run_scenario(sc, ControllerType::Adaptive, 0)), csv_of(run_scenario(sc, ControllerType::Adaptive, 0)))
        << name;
  }
}

TEST(RunScenario, SeedOnlyMovesThePerturbation) {
  Scenario sc = shipped("touch_mouse");
  sc.duration = 2.0;
  const std::string a = csv_of(run_scenario(sc, ControllerType::Adaptive, 1));
  const std::string b = csv_of(run_scenario(sc, ControllerType::Adaptive, 8));
  EXPECT_NE(a, b);
  sc.perturbation = {0.0, 0.0};
  std::string c = csv_of(run_scenario(sc, ControllerType::Adaptive, 1));
  std::string d = csv_of(run_scenario(sc, ControllerType::Adaptive, 8));
  c.erase(c.find("# seed="), c.find('\n', c.find("# seed=")) - c.find("# seed="));
  d.erase(d.find("# seed="), d.find('\n', d.find("# seed=")) - d.find("# seed="));
  EXPECT_EQ(c, d);
}

TEST(RunScenario, ControllerFaultIsReportedWithPartialMetrics) {
  Scenario sc = shipped("touch_mouse");
  sc.duration = 1.0;
  sc.controllers[ControllerType::Adaptive].q_k = 1e308;
  sc.controllers[ControllerType::Adaptive].q_v = 1e308;
  const MetricsRecord m = run_scenario(sc, ControllerType::Adaptive, 0);
  ASSERT_TRUE(m.fault.has_value());
  EXPECT_EQ(m.fault->rfind("controller-fault", 0), 0u);
  EXPECT_LT(m.series.size(), static_cast<std::size_t>(sc.ticks()));
  EXPECT_FALSE(m.aggregates.success);
  EXPECT_NE(csv_of(m).find("# fault=controller-fault"), std::string::npos);
}

TEST(Success, ObjectInFreeFallWithoutContactFails) {
  Scenario sc = shipped("grasp_ball");
  sc.reference.kind = "live";  // hand stays at rest, ball drops at release
  const MetricsRecord m = run_scenario(sc, ControllerType::Adaptive, 0);
  EXPECT_EQ(m.aggregates.max_force, 0.0);
  EXPECT_LT(m.series.back().object_offset.z(), -0.05);
  EXPECT_FALSE(m.aggregates.success);
}

TEST(Success, ArticulationBeyondTarget) {
  Scenario sc = shipped("open_door");
  MetricsRecord m;
  m.series = {tick_with(0.01, {0.0}, 0.0), tick_with(0.02, {0.0}, sc.success.target + 1e-6)};
  EXPECT_TRUE(success_check(sc, {}, m));
  m.series.back().articulation = sc.success.target;
  EXPECT_FALSE(success_check(sc, {}, m));
}

TEST(Success, SustainedThreeTipGraspWithSmallDrop) {
  Scenario sc = shipped("grasp_ball");
  MetricsRecord m;
  for (int k = 0; k < 100; ++k) {
    const double t = sc.success.window_start + 0.01 * k;
    m.series.push_back(tick_with(t, {1.0, 1.0, 0.0, 0.0, 1.0}, 0.0, Vec3(0, 0, -0.004 * k / 99.0)));
  }
  EXPECT_TRUE(success_check(sc, {}, m));
  m.series.back().object_offset.z() = -0.0051;
  EXPECT_FALSE(success_check(sc, {}, m));
}

TEST(Success, TouchNeedsContactBelowCeiling) {
  Scenario sc = shipped("touch_mouse");
  MetricsRecord m;
  for (int k = 0; k < 50; ++k) m.series.push_back(tick_with(sc.success.window_start + 0.01 * k, {0, 1.0, 1.0, 0, 0}));
  EXPECT_TRUE(success_check(sc, {}, m));
  for (auto& r : m.series) r.force[1] = 3.0 * sc.success.force_ceiling;
  EXPECT_FALSE(success_check(sc, {}, m));
}

TEST(Compare, SingleControllerSingleRepeatEqualsRun) {
  Scenario sc = shipped("touch_mouse");
  sc.duration = 3.0;
  const ComparisonTable t = compare_controllers(sc, {ControllerType::Fixed}, 1);
  const MetricsRecord m = run_scenario(sc, ControllerType::Fixed, 0);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0].mean_max_force, m.aggregates.max_force);
  EXPECT_EQ(t.rows[0].max_max_force, m.aggregates.max_force);
  EXPECT_EQ(t.rows[0].mean_mean_force, *m.aggregates.mean_force);
  EXPECT_EQ(t.rows[0].mean_transition_rate, m.aggregates.transition_rate);
  EXPECT_EQ(t.rows[0].success_rate, m.aggregates.success ? 1.0 : 0.0);
  EXPECT_EQ(csv_of(t.runs[0]), csv_of(m));
}

TEST(Compare, RowsPerSeedDistinctAndOrderIndependentOfWorkers) {
  Scenario sc = shipped("touch_mouse");
  sc.duration = 2.0;
  const ComparisonTable serial = compare_controllers(sc, {ControllerType::Adaptive, ControllerType::Position}, 4, 1);
  const ComparisonTable parallel = compare_controllers(sc, {ControllerType::Adaptive, ControllerType::Position}, 4, 3);
  ASSERT_EQ(serial.runs.size(), 8u);
  std::set<std::string> distinct;
  for (std::size_t i = 0; i < serial.runs.size(); ++i) {
    EXPECT_EQ(serial.runs[i].controller, i < 4 ? "adaptive" : "position");
    EXPECT_EQ(serial.runs[i].seed, i % 4);
    EXPECT_EQ(csv_of(serial.runs[i]), csv_of(parallel.runs[i]));
    distinct.insert(csv_of(serial.runs[i]));
  }
  EXPECT_EQ(distinct.size(), 8u);
  std::ostringstream a, b;
  write_comparison_csv(serial, a);
  write_comparison_csv(parallel, b);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_THROW(compare_controllers(sc, {ControllerType::Adaptive}, 0), InvalidArgument);
}

TEST(Compare, RankingOrdersByForce) {
  ComparisonTable t;
  std::vector<MetricsRecord> runs(1);
  runs[0].aggregates.max_force = 5.0;
  runs[0].aggregates.mean_force = 1.0;
  ComparisonRow a = summarize("a", runs);
  runs[0].aggregates.max_force = 2.0;
  runs[0].aggregates.mean_force = 3.0;
  ComparisonRow b = summarize("b", runs);
  EXPECT_EQ(a.mean_max_force, 5.0);
  EXPECT_EQ(b.mean_mean_force, 3.0);
}

TEST(MetricsCsv, LayoutAndNoWallTime) {
  Scenario sc = shipped("touch_mouse");
  sc.duration = 0.5;
  const MetricsRecord m = run_scenario(sc, ControllerType::Adaptive, 0);
  const std::string csv = csv_of(m);
  std::istringstream in(csv);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header.rfind("tick,t,e_rms,eps_rms,ks_mean,v_mean,articulation,object_dx,object_dy,object_dz,f_th,", 0), 0u);
  const auto columns = std::count(header.begin(), header.end(), ',') + 1;
  EXPECT_EQ(columns, 10 + 4 * 5);
  std::string line;
  int rows = 0;
  while (std::getline(in, line) && line[0] != '#') {
    EXPECT_EQ(std::count(line.begin(), line.end(), ',') + 1, columns);
    ++rows;
  }
  EXPECT_EQ(rows, 50);
  EXPECT_EQ(csv.find("wall"), std::string::npos);
  EXPECT_NE(csv.find("# success="), std::string::npos);
  const nlohmann::json s = summary_json(m);
  EXPECT_TRUE(s.contains("mean_step_wall_time"));
  EXPECT_EQ(s["ticks"], 50);
  EXPECT_EQ(s["max_force"].get<double>(), m.aggregates.max_force);
}

TEST(ProfileLog, OneRowPerTickWithAllChannels) {
  Scenario sc = shipped("touch_mouse");
  sc.duration = 0.3;
  std::ostringstream out;
  write_profile_header(out, 24);
  int rows = 0;
  run_scenario(sc, ControllerType::Adaptive, 0, [&](const ProfileRow& r) {
    write_profile_row(out, r);
    ++rows;
  });
  EXPECT_EQ(rows, 30);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(std::count(line.begin(), line.end(), ',') + 1, 2 + 6 * 24);
  EXPECT_NE(line.find("Ks_0"), std::string::npos);
  EXPECT_NE(line.find("tau_23"), std::string::npos);
  std::getline(in, line);
  EXPECT_EQ(std::count(line.begin(), line.end(), ',') + 1, 2 + 6 * 24);
}

TEST(Simulation, TimeAdvancesByControlPeriodWithoutDrift) {
  Scenario sc = shipped("touch_mouse");
  Simulation sim(sc, ControllerType::Fixed, 0);
  for (int k = 0; k < 333; ++k) sim.tick();
  EXPECT_EQ(sim.state().t, 333 * sc.ctrl_dt);
  sim.reset();
  EXPECT_EQ(sim.ticks_done(), 0);
  EXPECT_EQ(sim.state().t, 0.0);
}

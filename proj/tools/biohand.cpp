// biohand: run, compare and serve hand scenarios from the command line.
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "biohand/harness.hpp"
#include "biohand/teleop.hpp"

namespace fs = std::filesystem;
using namespace biohand;

namespace {

constexpr int kOk = 0;
constexpr int kTaskFailure = 2;
constexpr int kFault = 3;

std::string shipped_scenario(const std::string& task) {
  static const std::map<std::string, std::string> files = {
      {"grasp", "grasp_ball.json"}, {"door", "open_door.json"}, {"cap", "turn_cap.json"}, {"touch", "touch_mouse.json"}};
  auto it = files.find(task);
  if (it == files.end()) throw InvalidArgument("unknown task '" + task + "' (grasp|door|cap|touch)");
  return (fs::path(BIOHAND_SOURCE_DIR) / "scenarios" / it->second).string();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  return out;
}

int simulate(const std::string& scenario_path, const std::string& controller, std::optional<std::uint64_t> seed,
             const std::string& out_path, const std::string& profile_path) {
  const Scenario sc = load_scenario(scenario_path);
  const ControllerType type = controller.empty() ? sc.default_controller : parse_controller_type(controller);

  std::ofstream profile;
  ProfileSink sink;
  if (!profile_path.empty()) {
    profile = open_out(profile_path);
    write_profile_header(profile, static_cast<int>(sc.model.dofs()));
    sink = [&profile](const ProfileRow& r) { write_profile_row(profile, r); };
  }
  const MetricsRecord m = run_scenario(sc, type, seed.value_or(sc.seed), sink);

  if (!out_path.empty()) {
    auto out = open_out(out_path);
    write_metrics_csv(m, out);
    auto summary = open_out(out_path + ".summary.json");
    summary << summary_json(m).dump(2) << '\n';
  }
  const Aggregates& a = m.aggregates;
  std::cout << sc.name << " controller=" << m.controller << " seed=" << m.seed << " ticks=" << m.series.size()
            << " max_force=" << a.max_force << " mean_force=" << a.mean_force.value_or(0.0)
            << " progress=" << a.articulation_progress << " transitions=" << a.contact_transitions
            << " step_us=" << m.mean_step_wall_time * 1e6 << " success=" << (a.success ? "true" : "false") << '\n';
  if (m.fault) {
    std::cerr << *m.fault << '\n';
    return kFault;
  }
  return a.success ? kOk : kTaskFailure;
}

int compare(const std::string& scenario_path, int repeats, const std::string& out_path, int workers) {
  const Scenario sc = load_scenario(scenario_path);
  const ComparisonTable t =
      compare_controllers(sc, {ControllerType::Adaptive, ControllerType::Fixed, ControllerType::Position}, repeats,
                          workers);
  if (!out_path.empty()) {
    auto out = open_out(out_path);
    write_comparison_csv(t, out);
  }
  write_comparison_csv(t, std::cout);
  for (const auto& r : t.runs)
    if (r.fault) return kFault;
  return kOk;
}

int gen_ref(const std::string& task, const std::string& scenario_path, std::uint64_t seed, double dt,
            const std::string& out_path) {
  const Scenario sc = load_scenario(scenario_path.empty() ? shipped_scenario(task) : scenario_path);
  if (sc.reference.kind != "scripted" || sc.reference.script.task != task)
    throw InvalidArgument("scenario " + sc.name + " has no scripted '" + task + "' reference");
  const ReferencePtr ref = make_reference(sc, perturbed_scene(sc.scene, sc.perturbation, seed));
  save_trajectory(tabulate(*ref, sc.duration, dt), out_path);
  return kOk;
}

std::atomic<bool> g_stop{false};

int serve(const std::string& scenario_path, unsigned short port, double rate, const std::string& ui_dir) {
  Scenario sc = load_scenario(scenario_path);
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  if (!ui_dir.empty() && !fs::is_regular_file(fs::path(ui_dir) / "index.html"))
    throw InvalidArgument("--ui: no index.html in " + ui_dir);
  TeleopServer server(sc, port, rate, "127.0.0.1", ui_dir);
  std::cout << "serving " << sc.name << " on ws://127.0.0.1:" << server.port() << "/teleop" << std::endl;
  if (!ui_dir.empty()) std::cout << "panel at http://127.0.0.1:" << server.port() << "/" << std::endl;
  server.run(g_stop);
  std::cout << "stopped after " << server.ticks() << " ticks" << std::endl;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive biomimetic control of a simulated robot hand"};
  app.require_subcommand(1);

  std::string scenario, controller, out, profile, task;
  std::optional<std::uint64_t> seed;
  int repeats = 10, workers = 1;
  double dt = 0.01, rate = 30.0;
  unsigned short port = 8765;

  auto* sim = app.add_subcommand("simulate", "Run one scenario");
  sim->add_option("--scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  sim->add_option("--controller", controller, "adaptive|fixed|position (default: scenario's)");
  sim->add_option("--seed", seed, "Perturbation seed (default: scenario's)");
  sim->add_option("--out", out, "Metrics CSV; a .summary.json is written next to it");
  sim->add_option("--profile-log", profile, "Per-tick Ks/Kd/v/e/eps/tau CSV");

  auto* cmp = app.add_subcommand("compare", "Run all controllers over seeds 0..repeats-1");
  cmp->add_option("--scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  cmp->add_option("--repeats", repeats, "Seeds per controller")->check(CLI::PositiveNumber);
  cmp->add_option("--out", out, "Comparison table CSV");
  cmp->add_option("--workers", workers, "Parallel runs")->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("gen-ref", "Write a scripted task reference as a trajectory CSV");
  gen->add_option("--task", task, "grasp|door|cap|touch")->required()->check(CLI::IsMember({"grasp", "door", "cap", "touch"}));
  gen->add_option("--out", out, "Trajectory CSV")->required();
  gen->add_option("--scenario", scenario, "Scenario to take object poses from (default: shipped one)");
  gen->add_option("--seed", seed, "Perturbation seed");
  gen->add_option("--dt", dt, "Sample spacing, s")->check(CLI::PositiveNumber);

  auto* srv = app.add_subcommand("serve", "Teleoperation over WebSocket at /teleop");
  srv->add_option("--scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  srv->add_option("--port", port, "TCP port (0 picks a free one)");
  srv->add_option("--rate", rate, "State broadcast rate, Hz")->check(CLI::PositiveNumber);
  std::string ui_dir;
  srv->add_option("--ui", ui_dir, "Also serve the browser panel from this directory (e.g. ui/)");

  auto* mdl = app.add_subcommand("model", "Write the built-in 24-DOF hand model");
  mdl->add_option("--out", out, "Model file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : 1;  // usage errors share the generic code
  }

  try {
    if (*sim) return simulate(scenario, controller, seed, out, profile);
    if (*cmp) return compare(scenario, repeats, out, workers);
    if (*gen) return gen_ref(task, scenario, seed.value_or(0), dt, out);
    if (*srv) return serve(scenario, port, rate, ui_dir);
    if (*mdl) {
      save_model(default_hand24(), out);
      return kOk;
    }
  } catch (const ControllerFault& e) {
    std::cerr << "controller fault: " << e.what() << '\n';
    return kFault;
  } catch (const SimulationFault& e) {
    std::cerr << "simulation fault: " << e.what() << '\n';
    return kFault;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kOk;
}

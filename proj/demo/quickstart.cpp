// Quick tour of the library: run one task under each controller, then drive
// the teleop loop from a scripted "operator" without any network.
#include <cmath>
#include <cstdio>

#include "biohand/teleop_messages.hpp"

using namespace biohand;

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : BIOHAND_SOURCE_DIR "/scenarios";
  const Scenario touch = load_scenario(dir + "/touch_mouse.json");

  std::printf("%-9s %9s %9s %11s %7s\n", "control", "max N", "mean N", "changes/s", "ok");
  for (auto type : {ControllerType::Adaptive, ControllerType::Fixed, ControllerType::Position}) {
    const MetricsRecord m = run_scenario(touch, type, 0);
    const Aggregates& a = m.aggregates;
    std::printf("%-9s %9.3f %9.3f %11.2f %7s\n", m.controller.c_str(), a.max_force, a.mean_force.value_or(0.0),
                a.transition_rate, a.success ? "yes" : "no");
  }

  // Operator flexes the first finger's middle joint back and forth for 3 s.
  Scenario live = touch;
  live.reference.kind = "live";
  TeleopLoop loop(live);
  const int joint = live.model.joint_index("FFJ2");
  int frames = 0;
  for (int k = 0; k < 300; ++k) {
    CommandMessage cmd;
    cmd.q_d = live.initial_q;
    cmd.q_d[joint] = 0.6 + 0.5 * std::sin(2.0 * k * live.ctrl_dt);
    loop.post(cmd);
    if (auto s = loop.tick()) {
      if (++frames % 30 == 0)
        std::printf("t=%.2f s  q=%.3f  q_d=%.3f  Ks=%.3f  v=%+.4f\n", s->t, s->q[joint], s->q_d[joint], s->ks[joint],
                    s->v[joint]);
    }
  }
  std::printf("%d state frames for %ld control ticks\n", frames, loop.ticks());
}

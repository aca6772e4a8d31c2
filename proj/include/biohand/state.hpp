#pragma once

#include "biohand/types.hpp"

namespace biohand {

/// Measured joint configuration at time t.
struct JointState {
  Vec q;
  Vec q_dot;
  double t = 0.0;

  static JointState rest(Eigen::Index n) { return {Vec::Zero(n), Vec::Zero(n), 0.0}; }
};

/// Desired joint configuration. Desired velocity is identically zero.
struct ReferenceSample {
  double t = 0.0;
  Vec q_d;
};

}  // namespace biohand

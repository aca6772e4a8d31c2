#pragma once

#include <vector>

#include "biohand/hand_model.hpp"

namespace biohand {

struct IkResult {
  Vec q;
  double residual = 0.0;  // final fingertip position error, m
  int iterations = 0;
};

/// Damped least-squares positioning of one fingertip, moving only `joints`
/// and staying inside the joint limits.
inline IkResult solve_fingertip_ik(const HandModel& model, Vec q, int tip, const Vec3& target,
                                   const std::vector<int>& joints, int max_iterations = 200, double damping = 1e-2,
                                   double tolerance = 1e-6) {
  require_size(q, model.dofs(), "solve_fingertip_ik: q");
  IkResult r;
  q = model.clamp(q);
  const auto m = static_cast<Eigen::Index>(joints.size());
  for (r.iterations = 0; r.iterations < max_iterations; ++r.iterations) {
    const Vec3 err = target - fingertip_position(model, q, tip);
    r.residual = err.norm();
    if (r.residual < tolerance) break;
    const Mat full = fingertip_jacobian(model, q, tip);
    Mat jac(3, m);
    for (Eigen::Index c = 0; c < m; ++c) jac.col(c) = full.col(joints[c]);
    const Mat3 jjt = jac * jac.transpose() + damping * damping * Mat3::Identity();
    const Vec dq = jac.transpose() * jjt.ldlt().solve(err);
    for (Eigen::Index c = 0; c < m; ++c) q[joints[c]] += dq[c];
    q = model.clamp(q);
  }
  r.residual = (target - fingertip_position(model, q, tip)).norm();
  r.q = std::move(q);
  return r;
}

/// Finger joints on a fingertip's chain, excluding `frozen` (e.g. the wrist).
inline std::vector<int> finger_joints(const HandModel& model, int tip, const std::vector<int>& frozen) {
  std::vector<int> out;
  for (int j : model.chain(model.fingertips()[tip].joint))
    if (std::find(frozen.begin(), frozen.end(), j) == frozen.end()) out.push_back(j);
  return out;
}

}  // namespace biohand

#pragma once
// Independent reference evaluations used by the unit tests and the
// acceptance binary. Written without the library's vectorised code paths.

#include <cmath>
#include <random>
#include <vector>

#include "biohand/controller.hpp"

namespace oracle {

using namespace biohand;

// Direct evaluation in long double, no log-space shift.
inline std::vector<long double> activations(const Vec& c, const Vec& h, double s) {
  std::vector<long double> w(c.size());
  long double sum = 0.0L;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    const long double d = static_cast<long double>(s) - c[i];
    w[i] = std::exp(-0.5L * h[i] * d * d);
    sum += w[i];
  }
  for (auto& x : w) x /= sum;
  return w;
}

struct RandomBasis {
  Vec c, h;
  double s;
};

inline RandomBasis random_basis(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_dist(1, 16);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = n_dist(rng);
  RandomBasis b{Vec(n), Vec(n), 0.0};
  for (int i = 0; i < n; ++i) {
    b.c[i] = 1e-3 + (1.0 - 1e-3) * unit(rng);
    b.h[i] = std::pow(10.0, -2.0 + 8.0 * unit(rng));
  }
  b.s = std::pow(10.0, -6.0 + 6.3 * unit(rng));
  return b;
}

struct UpdateCase {
  AdaptiveParams params;
  AdaptationGains gains;
  TrackingError err;
  Vec g;
  double dt;
};

inline UpdateCase random_update_case(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nd(1, 24), kd(1, 12);
  std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.01, 5.0);
  const int n = nd(rng), k = kd(rng);
  UpdateCase c;
  c.params.theta_k = RowMat::NullaryExpr(n, k, [&] { return 2.0 * u(rng); });
  c.params.theta_d = RowMat::NullaryExpr(n, k, [&] { return u(rng); });
  c.params.theta_v = RowMat::NullaryExpr(n, k, [&] { return u(rng); });
  c.gains.q_k = Vec::NullaryExpr(n, [&] { return pos(rng); });
  c.gains.q_d = Vec::NullaryExpr(n, [&] { return pos(rng); });
  c.gains.q_v = Vec::NullaryExpr(n, [&] { return pos(rng); });
  c.gains.pi = pos(rng);
  c.err.e = Vec::NullaryExpr(n, [&] { return u(rng); });
  c.err.e_dot = Vec::NullaryExpr(n, [&] { return 3.0 * u(rng); });
  c.err.eps = c.err.e_dot + c.gains.pi * c.err.e;
  c.g = Vec::NullaryExpr(k, [&] { return pos(rng); });
  c.g /= c.g.sum();
  c.dt = std::uniform_real_distribution<double>(1e-4, 0.05)(rng);
  return c;
}

// Element by element: new = old + rate_n * signal_n * eps_n * g_j * dt.
inline AdaptiveParams update(const UpdateCase& c) {
  AdaptiveParams p = c.params;
  for (int which = 0; which < 3; ++which) {
    RowMat& th = which == 0 ? p.theta_k : which == 1 ? p.theta_d : p.theta_v;
    for (Eigen::Index n = 0; n < th.rows(); ++n) {
      const double rate = which == 0 ? c.gains.q_k[n] : which == 1 ? c.gains.q_d[n] : c.gains.q_v[n];
      const double signal = which == 0 ? c.err.e[n] : which == 1 ? c.err.e_dot[n] : 1.0;
      for (Eigen::Index j = 0; j < th.cols(); ++j) th(n, j) += rate * c.err.eps[n] * signal * c.g[j] * c.dt;
    }
  }
  return p;
}

inline double max_abs_diff(const AdaptiveParams& a, const AdaptiveParams& b) {
  return std::max({(a.theta_k - b.theta_k).cwiseAbs().maxCoeff(), (a.theta_d - b.theta_d).cwiseAbs().maxCoeff(),
                   (a.theta_v - b.theta_v).cwiseAbs().maxCoeff()});
}

}  // namespace oracle

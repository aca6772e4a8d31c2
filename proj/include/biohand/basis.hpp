#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "biohand/types.hpp"

namespace biohand {

/// Exponentially decaying clock that indexes the basis: ds/dt = -s / tau.
struct PhaseState {
  double s = 1.0;
};

/// Closed-form phase advance, s * exp(-dt / tau). Held at the smallest normal
/// double instead of underflowing to zero on very long runs.
inline PhaseState phase_step(PhaseState phase, double dt, double tau = 1.0) {
  if (!(dt >= 0.0)) throw InvalidArgument("phase_step: dt must be >= 0");
  if (!(tau > 0.0)) throw InvalidArgument("phase_step: tau must be > 0");
  return PhaseState{std::max(phase.s * std::exp(-dt / tau), std::numeric_limits<double>::min())};
}

/// exp(-0.5 h_n (s - c_n)^2) normalized to sum one, computed in log space so
/// the normalizer never underflows. Kernels far from s would still round to
/// zero with narrow widths; they are held at the smallest normal double so
/// every activation stays positive. No checks on c, h or s.
inline Vec normalized_kernels(const Vec& c, const Vec& h, double s) {
  Vec a(c.size());
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    const double d = s - c[i];
    a[i] = -0.5 * h[i] * d * d;
  }
  Vec g = (a.array() - a.maxCoeff()).exp().matrix();
  g /= g.sum();
  return g.cwiseMax(std::numeric_limits<double>::min());
}

/// Normalized Gaussian kernels over the phase variable.
///
/// Kernel n is exp(-0.5 * h_n * (s - c_n)^2); activations are the kernels
/// divided by their sum, so they are positive and sum to one.
class GaussianBasis {
 public:
  GaussianBasis(Vec centers, Vec widths, double s0 = 1.0)
      : centers_(std::move(centers)), widths_(std::move(widths)), s0_(s0) {
    validate();
  }

  /// Centers equidistant in time over [0, duration] (c_n = exp(-t_n / tau)),
  /// widths 1 / (c_{n+1} - c_n)^2 with the last width copying its neighbour.
  static GaussianBasis time_uniform(int n, double duration, double tau = 1.0, double s0 = 1.0) {
    if (n < 1) throw InvalidArgument("GaussianBasis: n_basis must be >= 1");
    if (!(duration > 0.0)) throw InvalidArgument("GaussianBasis: duration must be > 0");
    Vec c(n), h(n);
    for (int i = 0; i < n; ++i) {
      const double t = n == 1 ? 0.0 : duration * i / (n - 1);
      c[i] = s0 * std::exp(-t / tau);
    }
    if (n == 1) {
      h[0] = 1.0;
    } else {
      for (int i = 0; i + 1 < n; ++i) {
        const double d = c[i + 1] - c[i];
        h[i] = 1.0 / (d * d);
      }
      h[n - 1] = h[n - 2];
    }
    return GaussianBasis(std::move(c), std::move(h), s0);
  }

  [[nodiscard]] int size() const { return static_cast<int>(centers_.size()); }
  [[nodiscard]] const Vec& centers() const { return centers_; }
  [[nodiscard]] const Vec& widths() const { return widths_; }
  [[nodiscard]] double s0() const { return s0_; }

  /// Activation vector g(s).
  [[nodiscard]] Vec eval(double s) const {
    if (!(s > 0.0) || !std::isfinite(s)) throw InvalidArgument("eval_basis: phase must be finite and > 0");
    return normalized_kernels(centers_, widths_, s);
  }

 private:
  void validate() const {
    if (centers_.size() < 1) throw InvalidArgument("GaussianBasis: need at least one kernel");
    if (centers_.size() != widths_.size()) throw InvalidArgument("GaussianBasis: centers/widths length mismatch");
    if (!(s0_ > 0.0) || !std::isfinite(s0_)) throw InvalidArgument("GaussianBasis: s0 must be finite and > 0");
    for (Eigen::Index i = 0; i < centers_.size(); ++i) {
      if (!(widths_[i] > 0.0) || !std::isfinite(widths_[i]))
        throw InvalidArgument("GaussianBasis: widths must be finite and > 0");
      if (!(centers_[i] > 0.0) || centers_[i] > s0_)
        throw InvalidArgument("GaussianBasis: centers must lie in (0, s0]");
    }
    std::vector<double> sorted(centers_.data(), centers_.data() + centers_.size());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw InvalidArgument("GaussianBasis: centers must be pairwise distinct");
  }

  Vec centers_;
  Vec widths_;
  double s0_;
};

inline Vec eval_basis(const GaussianBasis& basis, double s) { return basis.eval(s); }

}  // namespace biohand

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "biohand/basis.hpp"
#include "oracles.hpp"

using namespace biohand;

namespace {

using oracle::random_basis;

}  // namespace

TEST(Basis, TwoKernelHandExample) {
  Vec c(2), h(2);
  c << 0.0, 1.0;
  h << 1.0, 1.0;
  const Vec g = normalized_kernels(c, h, 0.0);
  const double w1 = std::exp(-0.5);
  EXPECT_NEAR(g[0], 1.0 / (1.0 + w1), 1e-15);
  EXPECT_NEAR(g[1], w1 / (1.0 + w1), 1e-15);
  EXPECT_NEAR(g[0], 0.62246, 5e-6);
  EXPECT_NEAR(g[1], 0.37754, 5e-6);
}

TEST(Basis, SingleKernelIsOne) {
  const GaussianBasis b(Vec::Constant(1, 0.5), Vec::Constant(1, 3.0));
  for (double s : {1e-9, 0.1, 0.5, 0.9, 1.0, 3.0}) EXPECT_EQ(b.eval(s)[0], 1.0);
}

TEST(Basis, PeakAtOwnCenterForWellSeparatedKernels) {
  Vec c(3), h(3);
  c << 0.2, 0.5, 0.8;
  h = Vec::Constant(3, 400.0);
  const GaussianBasis b(c, h);
  for (int i = 0; i < 3; ++i) {
    Eigen::Index arg;
    b.eval(c[i]).maxCoeff(&arg);
    EXPECT_EQ(arg, i);
  }
}

TEST(Basis, MatchesDirectEvaluation) {
  std::mt19937_64 rng(7);
  int checked = 0;
  for (int k = 0; k < 1000; ++k) {
    oracle::RandomBasis rb = random_basis(rng);
    // keep to cases where plain evaluation does not underflow
    const auto w = oracle::activations(rb.c, rb.h, rb.s);
    if (!std::all_of(w.begin(), w.end(), [](long double x) { return x > 1e-250L && std::isfinite(x); })) continue;
    Vec c = rb.c;
    std::sort(c.data(), c.data() + c.size());
    if (std::adjacent_find(c.data(), c.data() + c.size()) != c.data() + c.size()) continue;
    const Vec g = GaussianBasis(rb.c, rb.h).eval(rb.s);
    for (Eigen::Index i = 0; i < g.size(); ++i)
      ASSERT_NEAR(g[i], static_cast<double>(w[i]), 1e-12 * std::max(1.0, static_cast<double>(w[i])));
    ++checked;
  }
  EXPECT_GT(checked, 100);
}

TEST(BasisProperty, SumsToOneAndStrictlyPositive) {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 1000; ++k) {
    const oracle::RandomBasis rb = random_basis(rng);
    const Vec g = GaussianBasis(rb.c, rb.h).eval(rb.s);
    ASSERT_NEAR(g.sum(), 1.0, 1e-12);
    ASSERT_GT(g.minCoeff(), 0.0);
  }
}

TEST(BasisProperty, DefaultBasisStaysPositiveOverLongRuns) {
  const GaussianBasis b = GaussianBasis::time_uniform(10, 10.0);
  PhaseState p{1.0};
  for (int k = 0; k < 100000; ++k) {
    p = phase_step(p, 0.01);
    if (k % 97 == 0) {
      const Vec g = b.eval(p.s);
      ASSERT_GT(g.minCoeff(), 0.0);
      ASSERT_NEAR(g.sum(), 1.0, 1e-12);
    }
  }
  EXPECT_GT(p.s, 0.0);
}

TEST(BasisProperty, PermutationEquivariant) {
  std::mt19937_64 rng(13);
  for (int k = 0; k < 1000; ++k) {
    const oracle::RandomBasis rb = random_basis(rng);
    std::vector<int> perm(rb.c.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Vec pc(rb.c.size()), ph(rb.c.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
      pc[i] = rb.c[perm[i]];
      ph[i] = rb.h[perm[i]];
    }
    const Vec g = GaussianBasis(rb.c, rb.h).eval(rb.s);
    const Vec gp = GaussianBasis(pc, ph).eval(rb.s);
    for (std::size_t i = 0; i < perm.size(); ++i) ASSERT_NEAR(gp[i], g[perm[i]], 1e-12);
  }
}

TEST(PhaseProperty, CompositionLaw) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const double s = 1e-3 + u(rng), a = 5.0 * u(rng), b = 5.0 * u(rng), tau = 0.1 + 3.0 * u(rng);
    const double two = phase_step(phase_step({s}, a, tau), b, tau).s;
    const double one = phase_step({s}, a + b, tau).s;
    ASSERT_NEAR(two, one, 1e-12);
  }
}

TEST(Phase, AgreesWithRungeKutta) {
  // ds/dt = -s / tau integrated with classical RK4
  const double tau = 1.7, T = 3.0, h = 1e-3;
  double s = 1.0;
  for (int k = 0; k < static_cast<int>(T / h + 0.5); ++k) {
    auto f = [&](double x) { return -x / tau; };
    const double k1 = f(s), k2 = f(s + 0.5 * h * k1), k3 = f(s + 0.5 * h * k2), k4 = f(s + h * k3);
    s += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  EXPECT_NEAR(phase_step({1.0}, T, tau).s, s, 1e-12);
}

TEST(Phase, NeverReachesZero) {
  EXPECT_GT(phase_step({1.0}, 1e6).s, 0.0);
  EXPECT_EQ(phase_step({0.4}, 0.0).s, 0.4);
}

TEST(Phase, RejectsBadArguments) {
  EXPECT_THROW(phase_step({1.0}, -0.1), InvalidArgument);
  EXPECT_THROW(phase_step({1.0}, 0.1, 0.0), InvalidArgument);
}

TEST(Basis, RejectsInvalidConfigurations) {
  Vec two(2);
  two << 0.3, 0.6;
  EXPECT_THROW(GaussianBasis(Vec(0), Vec(0)), InvalidArgument);
  EXPECT_THROW(GaussianBasis(two, Vec::Ones(3)), InvalidArgument);
  EXPECT_THROW(GaussianBasis(two, Vec::Constant(2, -1.0)), InvalidArgument);
  EXPECT_THROW(GaussianBasis(Vec::Constant(2, 0.5), Vec::Ones(2)), InvalidArgument);
  Vec outside(2);
  outside << 0.5, 1.5;
  EXPECT_THROW(GaussianBasis(outside, Vec::Ones(2)), InvalidArgument);
  EXPECT_THROW(GaussianBasis(two, Vec::Ones(2)).eval(0.0), InvalidArgument);
  EXPECT_THROW(GaussianBasis::time_uniform(0, 1.0), InvalidArgument);
}

TEST(Basis, TimeUniformLayout) {
  const GaussianBasis b = GaussianBasis::time_uniform(5, 4.0, 2.0);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(b.centers()[i], std::exp(-i * 1.0 / 2.0), 1e-15);
  for (int i = 0; i < 4; ++i) {
    const double d = b.centers()[i + 1] - b.centers()[i];
    EXPECT_NEAR(b.widths()[i], 1.0 / (d * d), 1e-9 * b.widths()[i]);
  }
  EXPECT_EQ(b.widths()[4], b.widths()[3]);
}

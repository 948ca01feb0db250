#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "ahflow/grid.hpp"

namespace {

using namespace ahflow;

TEST(RadialGrid, SpacingAndEndpoints) {
  const auto g = RadialGrid::with_spacing(3, 10.0, 0.05);
  EXPECT_EQ(g.size(), 201);
  EXPECT_DOUBLE_EQ(g.spacing(), 0.05);
  EXPECT_EQ(g.r(0), 0.0);
  EXPECT_EQ(g.r(g.size() - 1), 10.0);
  EXPECT_EQ(g.nodes().size(), 201u);
}

TEST(RadialGrid, RejectsBadShapes) {
  EXPECT_THROW(RadialGrid(3, 10.0, 8), PreconditionError);
  EXPECT_THROW(RadialGrid(3, 2.0, 20), PreconditionError);
  EXPECT_THROW(RadialGrid(2, 10.0, 20), PreconditionError);
  EXPECT_THROW(RadialGrid::with_spacing(3, 10.0, 0.0), PreconditionError);
}

TEST(FornbergWeights, ReproduceClassicalStencils) {
  const std::vector<double> x{-2, -1, 0, 1, 2};
  const auto w1 = fd_weights(0.0, x, 1);
  const auto w2 = fd_weights(0.0, x, 2);
  const double d1[] = {1.0 / 12, -2.0 / 3, 0, 2.0 / 3, -1.0 / 12};
  const double d2[] = {-1.0 / 12, 4.0 / 3, -5.0 / 2, 4.0 / 3, -1.0 / 12};
  for (int j = 0; j < 5; ++j) {
    EXPECT_NEAR(w1[j], d1[j], 1e-14);
    EXPECT_NEAR(w2[j], d2[j], 1e-14);
  }
}

TEST(RadialDifferentiator, ExactOnQuarticPolynomials) {
  const RadialGrid g(3, 5.0, 101);
  const RadialDifferentiator d(g);
  std::vector<double> f(g.size());
  for (int i = 0; i < g.size(); ++i) f[i] = std::pow(g.r(i), 4) - 3 * g.r(i) * g.r(i) + 1;  // even
  const auto f1 = d.first(f, Parity::even);
  const auto f2 = d.second(f, Parity::even);
  for (int i = 0; i < g.size(); ++i) {
    const double r = g.r(i);
    EXPECT_NEAR(f1[i], 4 * r * r * r - 6 * r, 1e-9) << i;
    EXPECT_NEAR(f2[i], 12 * r * r - 6, 1e-8) << i;
  }
}

TEST(RadialDifferentiator, FourthOrderOnSinh) {
  auto err = [](int nodes) {
    const RadialGrid g(3, 5.0, nodes);
    const RadialDifferentiator d(g);
    std::vector<double> f(g.size());
    for (int i = 0; i < g.size(); ++i) f[i] = std::sinh(g.r(i));
    const auto f1 = d.first(f, Parity::odd);
    double worst = 0;
    for (int i = 0; i < g.size(); ++i)
      worst = std::max(worst, std::abs(f1[i] - std::cosh(g.r(i))) / std::cosh(g.r(i)));
    return worst;
  };
  const double ratio = err(31) / err(61);
  EXPECT_GT(ratio, 12.0);  // 16 for a clean fourth-order method
}

TEST(Interpolation, MonotoneCubicPreservesMonotonicity) {
  const std::vector<double> x{0, 1, 2, 3, 4}, y{0, 0.1, 0.2, 3.0, 3.1};
  const MonotoneCubic m(x, y);
  double prev = -1;
  for (double s = 0; s <= 4.0; s += 0.01) {
    const double v = m(s);
    EXPECT_GE(v, prev - 1e-14);
    prev = v;
  }
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(m(x[i]), y[i]);
}

TEST(Interpolation, HermiteIsAccurateBetweenNodes) {
  const RadialGrid g(3, 2 * std::numbers::pi, 129);
  std::vector<double> f(g.size());
  for (int i = 0; i < g.size(); ++i) f[i] = std::sin(g.r(i));
  const HermiteInterpolant h(g, f, Parity::odd);
  for (double s = 0.013; s < 6.2; s += 0.1) EXPECT_NEAR(h(s), std::sin(s), 1e-6) << s;
}

}  // namespace

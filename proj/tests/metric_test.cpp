#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "ahflow/admissibility.hpp"
#include "ahflow/curvature.hpp"
#include "ahflow/metric.hpp"
#include "ahflow/norms.hpp"

namespace {

using namespace ahflow;

const RadialGrid grid = RadialGrid::with_spacing(3, 10.0, 0.05);

TEST(RotSymMetric, ConstructorRejectsDegenerateSamples) {
  auto phi = std::vector<double>(grid.size(), 1.0);
  auto psi = hyperbolic_metric(grid).psi();
  phi[17] = 0.0;
  EXPECT_THROW(RotSymMetric(grid, phi, psi), DegenerateMetricError);
  phi[17] = 1.0;
  psi[0] = 0.1;
  EXPECT_THROW(RotSymMetric(grid, phi, psi), DegenerateMetricError);

  phi[5] = std::nan("");
  const auto g = RotSymMetric::unchecked(grid, phi, psi);
  ASSERT_TRUE(g.degeneracy().has_value());
  EXPECT_EQ(g.degeneracy()->node, 5);
}

TEST(RotSymMetric, HyperbolicClosesSmoothlyAtOrigin) {
  const auto g = hyperbolic_metric(grid);
  EXPECT_TRUE(g.origin_smooth(1e-6));
  EXPECT_NEAR(g.psi_slope_at_origin(), 1.0, 1e-6);
}

TEST(RotSymMetric, DifferenceAndAddAreInverse) {
  const auto gh = hyperbolic_metric(grid);
  const auto g = from_profile(grid, sample(grid, [](double r) { return gaussian_bump_profile(0.5, r); }), 1.0).metric;
  const auto d = difference(g, gh);
  const auto back = add(gh, d);
  for (int i = 0; i < grid.size(); ++i) {
    EXPECT_NEAR(back.phi()[i], g.phi()[i], 1e-12);
    EXPECT_NEAR(back.psi()[i], g.psi()[i], 1e-9 * std::max(1.0, g.psi()[i]));
  }
}

TEST(Snapshot, RoundTripIsExact) {
  const auto g = from_profile(grid, sample(grid, [](double r) { return gaussian_bump_profile(0.8, r); }), 1.0).metric;
  const auto back = parse_snapshot(format_snapshot(g));
  EXPECT_TRUE(back == g);
}

TEST(Snapshot, MalformedInputIsRejected) {
  EXPECT_THROW(parse_snapshot(""), Error);
  EXPECT_THROW(parse_snapshot("# nonsense\n"), Error);
  EXPECT_THROW(parse_snapshot("# n=3 r_max=10 nodes=201\n0,1,0\n"), Error);
}

TEST(Profile, DecayAndParityFlags) {
  const auto ok = from_profile(grid, sample(grid, [](double r) { return gaussian_bump_profile(1.0, r); }), 1.0);
  EXPECT_TRUE(ok.even_at_origin);
  EXPECT_TRUE(ok.decays_at_rate_mu);
  // w ~ r is odd at the origin, w ~ e^{-r/2} decays too slowly for mu = 1
  const auto odd = from_profile(grid, sample(grid, [](double r) { return r * std::exp(-r * r); }), 1.0);
  EXPECT_FALSE(odd.even_at_origin);
  const auto slow = from_profile(grid, sample(grid, [](double r) { return r * r * std::exp(-0.5 * r); }), 1.0);
  EXPECT_FALSE(slow.decays_at_rate_mu);
  EXPECT_THROW(from_profile(grid, std::vector<double>(grid.size(), 1.0), 1.0), PreconditionError);
}

TEST(WeightedNorm, MatchesHandComputedMaximum) {
  // frame component h_rr/phi^2 = c at one interior node only; C^0_mu norm is c rho^{-mu} there
  const auto gh = hyperbolic_metric(grid);
  auto p = MetricPerturbation::zero(grid);
  const int i = 60;
  p.h_rr[i] = 0.25;
  const BoundaryWeight w(grid);
  const double expected = 0.25 * std::cosh(grid.r(i));
  EXPECT_NEAR(weighted_norm(gh, p, {1.0, 0}, w), expected, 1e-12 * expected);
  // second difference of a spike is -2c/h^2 at the spike
  const double h = grid.spacing();
  EXPECT_NEAR(weighted_norm(gh, p, {1.0, 2}, w), 0.5 / (h * h) * std::cosh(grid.r(i)), 1e-9 * expected / (h * h));
}

TEST(WeightedNorm, AngularComponentCarriesMultiplicity) {
  const auto gh = hyperbolic_metric(grid);
  auto p = MetricPerturbation::zero(grid);
  const int i = 40;
  p.h_sph[i] = 0.1 * gh.psi()[i] * gh.psi()[i];
  const BoundaryWeight w(grid);
  EXPECT_NEAR(weighted_norm(gh, p, {0.5, 0}, w), 0.1 * std::sqrt(2.0) * std::pow(std::cosh(grid.r(i)), 0.5), 1e-12);
}

TEST(WeightedNorm, ValidatesMu) {
  EXPECT_THROW((WeightedNormParams{2.0, 0}.validate(3)), PreconditionError);
  EXPECT_THROW((WeightedNormParams{0.0, 0}.validate(3)), PreconditionError);
  EXPECT_THROW((WeightedNormParams{1.0, 3}.validate(3)), PreconditionError);
  EXPECT_NO_THROW((WeightedNormParams{2.5, 2}.validate(4)));
}

TEST(Admissibility, BumpFamilyAndFlatSpace) {
  const auto bump = from_profile(grid, sample(grid, [](double r) { return gaussian_bump_profile(1.0, r); }), 1.0).metric;
  const auto rep = check_ah_admissible(bump, {1.0, 0});
  EXPECT_TRUE(rep.admissible());
  EXPECT_LT(rep.min_sec_t, 0.0);
  EXPECT_GT(rep.distance_to_hyperbolic, 0.0);

  // flat space has sec_T = 0, which fails the strict curvature condition
  const auto flat = check_ah_admissible(flat_metric(grid), {1.0, 0});
  EXPECT_FALSE(flat.admissible());
}

TEST(Admissibility, LargeProfileLosesNegativeTangentialCurvature) {
  // sec_T < 0 iff w^2 < sinh^2 r; A = 6 violates it near r = 0.5
  const auto g = from_profile(grid, sample(grid, [](double r) { return gaussian_bump_profile(6.0, r); }), 1.0).metric;
  const auto rep = check_ah_admissible(g, {1.0, 0});
  EXPECT_FALSE(rep.negative_tangential_curvature);
  const auto sec = sectional_tangential(g);
  EXPECT_GT(*std::max_element(sec.begin() + 1, sec.end()), 0.0);
}

}  // namespace

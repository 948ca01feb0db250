#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "ahflow/flow.hpp"

namespace {

using namespace ahflow;

RotSymMetric bump(const RadialGrid& grid, double a) {
  return from_profile(grid, sample(grid, [a](double r) { return gaussian_bump_profile(a, r); }), 1.0).metric;
}

double max_interior(const std::vector<double>& v, double scale_power, const RotSymMetric& g) {
  double m = 0;
  for (int i = 1; i < g.size() - 1; ++i) m = std::max(m, std::abs(v[i]) / std::pow(g.psi()[i], scale_power));
  return m;
}

TEST(FlowSpeed, HyperbolicMetricIsStationaryForNormalizedFlows) {
  const auto grid = RadialGrid::with_spacing(3, 10.0, 0.05);
  const auto gh = hyperbolic_metric(grid);
  const auto rf = rf_rhs(gh, true);
  const auto rdtf = rdtf_rhs(gh, gh, true);
  EXPECT_LT(max_interior(rf.h_rr, 0, gh), 1e-4);
  EXPECT_LT(max_interior(rf.h_sph, 2, gh), 1e-3);  // frame component, largest next to the axis
  EXPECT_LT(max_interior(rdtf.h_rr, 0, gh), 1e-4);
  EXPECT_LT(max_interior(rdtf.h_sph, 2, gh), 1e-3);
  for (double w : deturck_vector(gh, gh)) EXPECT_NEAR(w, 0.0, 1e-14);

  // unnormalized: -2 Ric = 2(n-1) g_h
  const auto raw = rf_rhs(gh, false);
  EXPECT_NEAR(raw.h_rr[50], 4.0, 1e-4);
}

TEST(FlowConfig, ValidationAndStableStep) {
  const auto grid = RadialGrid::with_spacing(3, 10.0, 0.1);
  const auto g = hyperbolic_metric(grid);
  EXPECT_NEAR(stable_dt(g, 0.5), 0.5 * 0.01 / 2.0, 1e-15);
  FlowConfig cfg;
  cfg.dt = 2.0 * stable_dt(g, 0.5);
  EXPECT_THROW(run_flow(g, cfg), PreconditionError);
  cfg.dt = -1;
  EXPECT_THROW(run_flow(g, cfg), PreconditionError);
  cfg.dt = 1e-3;
  cfg.cfl_safety = 1.5;
  EXPECT_THROW(cfg.validate(), PreconditionError);
}

TEST(RunFlow, DeTurckFlowContractsTowardHyperbolic) {
  const auto grid = RadialGrid::with_spacing(3, 10.0, 0.1);
  const auto g0 = bump(grid, 1.0);
  FlowConfig cfg;
  cfg.reference = hyperbolic_metric(grid);
  cfg.dt = stable_dt(g0, 0.5);
  cfg.t_end = 0.5;
  cfg.record_every = 20;
  const auto traj = run_flow(g0, cfg);
  ASSERT_EQ(traj.status, FlowStatus::completed);
  EXPECT_DOUBLE_EQ(traj.times.back(), 0.5);
  EXPECT_LT(traj.diagnostics.back().norm_c0, 0.2 * traj.diagnostics.front().norm_c0);
  EXPECT_GT(traj.diagnostics.front().w_inf, 0.0);
}

TEST(RunFlow, ExplicitIntegratorIsFourthOrderInTime) {
  const auto grid = RadialGrid::with_spacing(3, 10.0, 0.2);
  const auto g0 = bump(grid, 0.8);
  auto final_phi = [&](double dt) {
    FlowConfig cfg;
    cfg.reference = hyperbolic_metric(grid);
    cfg.dt = dt;
    cfg.t_end = 0.2;
    cfg.record_every = 1000000;
    return run_flow(g0, cfg).final_metric().phi();
  };
  const double dt = stable_dt(g0, 0.5);
  const auto a = final_phi(dt), b = final_phi(dt / 2), c = final_phi(dt / 4);
  double e1 = 0, e2 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    e1 = std::max(e1, std::abs(a[i] - b[i]));
    e2 = std::max(e2, std::abs(b[i] - c[i]));
  }
  ASSERT_GT(e2, 0.0);
  EXPECT_GT(e1 / e2, 10.0);
}

TEST(RunFlow, SemiImplicitAgreesWithExplicit) {
  const auto grid = RadialGrid::with_spacing(3, 10.0, 0.1);
  const auto g0 = bump(grid, 0.8);
  FlowConfig cfg;
  cfg.reference = hyperbolic_metric(grid);
  cfg.dt = stable_dt(g0, 0.5);
  cfg.t_end = 0.3;
  const auto ex = run_flow(g0, cfg);
  cfg.integrator = Integrator::semi_implicit;
  cfg.dt *= 0.5;
  const auto im = run_flow(g0, cfg);
  ASSERT_EQ(im.status, FlowStatus::completed);
  for (int i = 0; i < grid.size(); ++i) EXPECT_NEAR(im.final_metric().phi()[i], ex.final_metric().phi()[i], 5e-3);
}

TEST(RunFlow, DegenerateStartIsReportedNotThrown) {
  const auto grid = RadialGrid::with_spacing(3, 10.0, 0.1);
  auto phi = hyperbolic_metric(grid).phi();
  phi[10] = -1.0;
  const auto g = RotSymMetric::unchecked(grid, phi, hyperbolic_metric(grid).psi());
  FlowConfig cfg;
  cfg.dt = 1e-4;
  const auto traj = run_flow(g, cfg);
  EXPECT_EQ(traj.status, FlowStatus::degenerated);
  ASSERT_TRUE(traj.failure.has_value());
  EXPECT_EQ(traj.failure->node, 10);
  EXPECT_TRUE(traj.snapshots.empty());
}

TEST(TrajectoryCsv, HeaderMetadataAndFinalStatus) {
  const auto grid = RadialGrid::with_spacing(3, 10.0, 0.1);
  FlowConfig cfg;
  cfg.reference = hyperbolic_metric(grid);
  cfg.dt = 2e-3;
  cfg.t_end = 0.01;
  cfg.record_every = 2;
  const auto csv = format_trajectory_csv(run_flow(bump(grid, 0.5), cfg), "unit-test");
  EXPECT_EQ(csv.rfind("# unit-test\nt,norm_c0_mu,norm_c2_mu,min_secT,einstein_residual,w_inf,status\n", 0), 0u);
  EXPECT_NE(csv.find(",running\n"), std::string::npos);
  const std::string tail = ",completed\n";
  ASSERT_GT(csv.size(), tail.size());
  EXPECT_EQ(csv.substr(csv.size() - tail.size()), tail);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2 + 4);  // t = 0, 0.004, 0.008, 0.01
}

}  // namespace

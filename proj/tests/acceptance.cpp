// Acceptance run: one line per criterion, "criterion <k> <PASS|FAIL> <name>: <metrics> [<seconds>s / budget]".
// Exit status is 1 when any selected criterion fails.
//
// Usage: ahflow_acceptance [criterion numbers...]   (all ten when none given)

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <future>
#include <iostream>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "ahflow/curvature.hpp"
#include "ahflow/experiments.hpp"
#include "ahflow/spectral.hpp"

namespace {

using namespace ahflow;

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Closed-form curvature of phi = sqrt(1 + w^2), psi = sinh r with
// w = A r^2 exp(-(r/s)^2), independent of the grid code.
struct ExactProfileCurvature {
  BumpProfile w;

  double sec_t(double r) const {
    const double p = phi(r), s = std::cosh(r) / p;
    return (1.0 - s * s) / (std::sinh(r) * std::sinh(r));
  }
  double sec_r(double r) const {
    const double p = phi(r);
    return -(std::sinh(r) / p - std::cosh(r) * phi_r(r) / (p * p)) / (p * std::sinh(r));
  }

 private:
  double wv(double r) const { return w(r); }
  double w_r(double r) const {
    const double s2 = w.width * w.width;
    return w.amplitude * std::exp(-r * r / s2) * (2.0 * r - 2.0 * r * r * r / s2);
  }
  double phi(double r) const { return std::sqrt(1.0 + wv(r) * wv(r)); }
  double phi_r(double r) const { return wv(r) * w_r(r) / phi(r); }
};

// Criterion 4 base metric: w = r^2 exp(-r^2).
const BumpProfile base_profile{1.0, 1.0};

Outcome curvature_oracle() {
  const double h = 0.02, tol = 10 * h * h;
  const auto grid = RadialGrid::with_spacing(3, 10.0, h);
  const int n = grid.dim();
  double worst_rr = 0, worst_sph = 0, worst_sec = 0;
  for (const auto& prof : random_profiles(20240611, 10)) {
    const auto g = profile_metric(grid, prof, 1.0);
    const auto ric = ricci(g);
    const ExactProfileCurvature exact{prof};
    for (int i = 1; i < grid.size() - 1; ++i) {
      const double r = grid.r(i);
      const double kr = exact.sec_r(r), kt = exact.sec_t(r);
      worst_rr = std::max(worst_rr, std::abs(ric.rr[i] / (g.phi()[i] * g.phi()[i]) - (n - 1) * kr));
      worst_sph = std::max(worst_sph, std::abs(ric.sph[i] / (g.psi()[i] * g.psi()[i]) - (kr + (n - 2) * kt)));
    }
  }
  const auto kt_h = sectional_tangential(hyperbolic_metric(grid));
  for (int i = 1; i < grid.size() - 1; ++i) worst_sec = std::max(worst_sec, std::abs(kt_h[i] + 1.0));
  const bool ok = worst_rr < tol && worst_sph < tol && worst_sec < tol;
  return {ok, fmt::format("max |Ric_rr/phi^2 - (n-1)secR| = {:.3e}, max |Ric_sph/psi^2 - (secR+(n-2)secT)| = {:.3e}, "
                          "max |secT(g_h)+1| = {:.3e}, tol 10h^2 = {:.1e}",
                          worst_rr, worst_sph, worst_sec, tol)};
}

Outcome fixed_point() {
  const auto grid = RadialGrid::with_spacing(3, 10.0, 0.01);
  const auto gh = hyperbolic_metric(grid);
  std::string detail;
  bool ok = true;
  for (FlowKind kind : {FlowKind::ricci, FlowKind::deturck}) {
    ExperimentConfig ex;
    ex.kind = kind;
    ex.record_interval = 0.05;
    const auto traj = run_flow(gh, make_flow_config(gh, ex, 5.0));
    double worst = 0;
    for (const auto& d : traj.diagnostics) worst = std::max(worst, d.norm_c0);
    const bool good = traj.status == FlowStatus::completed && traj.times.back() == 5.0 && worst < 1e-3;
    ok = ok && good;
    detail += fmt::format("{}{}: status {}, sup_t C0 distance {:.3e}", detail.empty() ? "" : "; ",
                          kind == FlowKind::ricci ? "RF" : "RDTF", to_string(traj.status), worst);
  }
  return {ok, detail};
}

GaugeConsistencyReport gauge_report() {
  static const GaugeConsistencyReport rep = [] {
    ExperimentConfig ex;
    return gauge_consistency_check([](const RadialGrid& g) { return profile_metric(g, base_profile, 1.0); }, 3, 10.0,
                                   {0.1, 0.05, 0.025}, 1.0, 4, ex);
  }();
  return rep;
}

Outcome gauge_consistency() {
  const auto rep = gauge_report();
  if (!rep.failure.empty()) return {false, rep.failure};
  std::string levels;
  for (const auto& l : rep.levels) levels += fmt::format(" h={}:{:.3e}", l.h, l.discrepancy);
  return {rep.order >= 1.5 && rep.monotone,
          fmt::format("fitted order {:.3f} (need >= 1.5), monotone {}, discrepancies{}", rep.order, rep.monotone, levels)};
}

ExperimentConfig convergence_config() {
  ExperimentConfig ex;
  ex.t_end = 20.0;
  ex.record_interval = 0.1;
  return ex;
}

const RadialGrid convergence_grid = RadialGrid::with_spacing(3, 10.0, 0.025);

std::string pre_floor_fit(const FlowTrajectory& traj) {
  // diagnostic only: the fit over the decaying part of the series, before the discretization floor
  std::vector<double> t, y;
  for (std::size_t k = 0; k < traj.times.size(); ++k)
    if (traj.times[k] >= 0.6 - 1e-9 && traj.times[k] <= 1.2 + 1e-9) {
      t.push_back(traj.times[k]);
      y.push_back(traj.diagnostics[k].norm_c0);
    }
  try {
    const auto f = fit_log_linear(t, y, 1.0);
    return fmt::format("diagnostic fit on [0.6, 1.2]: omega {:.3f}, R^2 {:.4f}", f.omega, f.r2);
  } catch (const FitError& e) {
    return std::string("diagnostic fit unavailable: ") + e.what();
  }
}

std::string verdict_text(const ConvergenceVerdict& v) {
  return fmt::format("final distance {:.4e}, fit R^2 {}, omega_fit {}, entered eps/2 at t={}, {}", v.final_distance,
                     v.fit ? fmt::format("{:.4f}", v.fit->r2) : "n/a",
                     v.fit ? fmt::format("{:.3e}", v.fit->omega) : "n/a",
                     v.entered_half_eps ? fmt::format("{:.3g}", *v.entered_half_eps) : "never", v.reason);
}

Outcome convergence() {
  const auto g0 = profile_metric(convergence_grid, base_profile, 1.0);
  const auto adm = check_ah_admissible(g0, {1.0, 0});
  if (!(adm.min_sec_t < 0)) return {false, "base metric does not have min sec_T < 0"};
  const auto rep = convergence_experiment("w=r^2exp(-r^2)", g0, convergence_config());
  return {rep.verdict.converged, fmt::format("min secT {:.3f}; {}; {}", adm.min_sec_t, verdict_text(rep.verdict),
                                             pre_floor_fit(rep.trajectory))};
}

Outcome stability() {
  const auto g_star = profile_metric(convergence_grid, base_profile, 1.0);
  const auto ex = convergence_config();
  std::vector<std::future<StabilityReport>> jobs;
  for (const auto& b : standard_bumps())
    jobs.push_back(std::async(std::launch::async, [&, b] {
      return convergence_stability_experiment("w=r^2exp(-r^2)", g_star, b, 1e-2, ex);
    }));
  int converged = 0;
  std::string detail;
  for (auto& j : jobs) {
    const auto rep = j.get();
    converged += rep.verdict.converged ? 1 : 0;
    detail += fmt::format(" [{}: {} final {:.3e} R^2 {}]", rep.perturbation_id, rep.verdict.converged ? "converged" : "fail",
                          rep.verdict.final_distance, rep.verdict.fit ? fmt::format("{:.4f}", rep.verdict.fit->r2) : "n/a");
  }
  return {converged == static_cast<int>(jobs.size()), fmt::format("{}/{} converged;{}", converged, jobs.size(), detail)};
}

Outcome continuous_dependence() {
  const auto grid = RadialGrid::with_spacing(3, 10.0, 0.05);
  const auto g0 = profile_metric(grid, base_profile, 1.0);
  ExperimentConfig ex;
  ex.norm = {1.0, 2};
  const auto p = unit_bump(g0, standard_bumps().front(), ex.norm);
  const auto rep = continuous_dependence_sweep(g0, p, {1e-3, 1e-4}, 1.0, ex);
  std::string ratios;
  for (std::size_t i = 0; i < rep.ratios.size(); ++i)
    ratios += fmt::format(" delta={:g}: {}", rep.deltas[i], rep.ratios[i] ? fmt::format("{:.6e}", *rep.ratios[i]) : "none");
  return {rep.pass, fmt::format("ratios{}; relative spread {:.3e} (need < 0.5)", ratios, rep.spread)};
}

Outcome koiso_bochner() {
  bool ok = true;
  std::string detail;
  for (int n : {3, 4}) {
    const auto b = hyperbolic_spectral_bound(n, 0.02, 12.0);
    const bool good = b.min_real >= (n - 2) - 0.1 && b.min_real_refined >= (n - 2) - 0.1 && b.relative_change() < 0.02;
    ok = ok && good;
    detail += fmt::format("{}n={}: min Re {:.4f} (h=0.02), {:.4f} (h=0.01), change {:.3f}%", detail.empty() ? "" : "; ", n,
                          b.min_real, b.min_real_refined, 100 * b.relative_change());
  }
  return {ok, detail};
}

Outcome sectoriality() {
  const auto grid = RadialGrid::with_spacing(3, 10.0, 0.1);
  const auto gh = hyperbolic_metric(grid);
  const auto L = assemble_linearized(gh, gh);
  const SectorOptions opt;
  const double omega = (grid.dim() - 2) / 2.0;
  const auto good = sector_check(L, omega, std::numbers::pi / 3, opt);
  const auto bad = sector_check(L, 10.0, std::numbers::pi / 3, opt);
  return {good.pass() && good.samples.size() == 2048 && !bad.pass(),
          fmt::format("omega={}: {} with C = {:.4g} over {} samples; omega=10: {} ({} eigenvalues in sector, C = {:.4g})",
                      omega, good.pass() ? "pass" : "fail", good.C, good.samples.size(), bad.pass() ? "pass" : "fail",
                      bad.eigenvalues_in_sector.size(), bad.C)};
}

Outcome indicial() {
  bool ok = true;
  double worst_emp = 0, worst_sum = 0;
  for (int n : {3, 4}) {
    const auto grid = RadialGrid::with_spacing(n, 14.0, 0.05);
    const auto op = scalar_indicial_operator(grid);
    for (double lambda : {0.0, -1.0, -3.0}) {
      const double mid = 0.5 * (n - 1);
      const double expected = mid + std::sqrt(mid * mid - lambda);
      const auto root = empirical_indicial(op, lambda, {}).decaying_root(n);
      const double err = root ? std::abs(*root - expected) : std::numeric_limits<double>::infinity();
      worst_emp = std::max(worst_emp, err);
      const auto pair = indicial_roots_scalar(n, lambda);
      worst_sum = std::max(worst_sum, std::abs(pair.gamma_minus + pair.gamma_plus - double(n - 1)));
    }
  }
  ok = worst_emp < 0.05 && worst_sum < 1e-12;
  return {ok, fmt::format("max |gamma+ empirical - closed form| = {:.3e} (need < 0.05), max |sum - (n-1)| = {:.1e}",
                          worst_emp, worst_sum)};
}

Outcome chaining() {
  const auto rep = gauge_report();
  if (!rep.failure.empty()) return {false, rep.failure};
  bool ok = rep.segments == 4 && !rep.levels.empty();
  std::string detail;
  for (const auto& l : rep.levels) {
    ok = ok && l.chained_discrepancy <= 3.0 * l.discrepancy;
    detail += fmt::format(" h={}: |N=4 - N=1| = {:.3e} vs 3x{:.3e}", l.h, l.chained_discrepancy, l.discrepancy);
  }
  return {ok, "at tau=1:" + detail};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "curvature oracle", 10, curvature_oracle},
      {2, "fixed point", 120, fixed_point},
      {3, "gauge consistency", 600, gauge_consistency},
      {4, "convergence", 300, convergence},
      {5, "convergence stability", 900, stability},
      {6, "continuous dependence", 600, continuous_dependence},
      {7, "Koiso-Bochner bound", 300, koiso_bochner},
      {8, "sectoriality", 300, sectoriality},
      {9, "indicial roots", 120, indicial},
      {10, "chaining", 300, chaining},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::cout << fmt::format("criterion {} {} {}: {} [{:.1f}s / {:.0f}s{}]", c.id, pass ? "PASS" : "FAIL", c.name,
                             o.detail, secs, c.budget_seconds, in_time ? "" : " over budget")
              << std::endl;
  }
  std::cout << fmt::format("{} criteria failed", failed) << std::endl;
  return failed == 0 ? 0 : 1;
}

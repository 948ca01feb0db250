#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "ahflow/admissibility.hpp"
#include "ahflow/error.hpp"
#include "ahflow/flow.hpp"
#include "ahflow/gauge.hpp"
#include "ahflow/metric.hpp"
#include "ahflow/norms.hpp"

namespace ahflow {

enum class FlowKind { ricci, deturck };

inline const char* to_string(FlowKind k) { return k == FlowKind::ricci ? "ricci" : "deturck"; }

/// Settings shared by the scripted experiments. Flows are always normalized;
/// `kind = deturck` uses g_h as the reference metric.
struct ExperimentConfig {
  FlowKind kind = FlowKind::deturck;
  double t_end = 20.0;
  double cfl_safety = 0.5;
  double record_interval = 0.1;  ///< time between recorded snapshots
  Integrator integrator = Integrator::rk4;
  WeightedNormParams norm{1.0, 2};
  double epsilon = 1e-3;       ///< convergence target in weighted C^0
  double min_r2 = 0.99;        ///< log-linear fit quality required for a rate
  double fit_fraction = 0.5;   ///< trailing fraction of records used by the fit
};

inline FlowConfig make_flow_config(const RotSymMetric& g0, const ExperimentConfig& ex, double t_end) {
  FlowConfig cfg;
  cfg.normalized = true;
  cfg.t_end = t_end;
  cfg.cfl_safety = ex.cfl_safety;
  cfg.integrator = ex.integrator;
  cfg.dt = stable_dt(g0, ex.cfl_safety);
  cfg.record_every = std::max(1, static_cast<int>(std::lround(ex.record_interval / cfg.dt)));
  cfg.norm = ex.norm;
  if (ex.kind == FlowKind::deturck) cfg.reference = hyperbolic_metric(g0.grid());
  return cfg;
}

// --- fits and verdicts ------------------------------------------------------------

/// log y = log A - omega t by least squares.
struct LogLinearFit {
  double amplitude = 0, omega = 0, r2 = 0;
  int points = 0;
  double t_first = 0, t_last = 0;
};

inline LogLinearFit fit_log_linear(const std::vector<double>& t, const std::vector<double>& y, double fraction) {
  if (t.size() != y.size()) throw FitError("log-linear fit: series lengths differ");
  if (!(fraction > 0 && fraction <= 1)) throw FitError("log-linear fit: fraction must lie in (0, 1]");
  const std::size_t n = t.size();
  const std::size_t start = n - static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  if (n - start < 3) throw FitError("log-linear fit: fewer than three points in the window");
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  const double m = static_cast<double>(n - start);
  for (std::size_t i = start; i < n; ++i) {
    if (!(y[i] > 0) || !std::isfinite(y[i])) throw FitError("log-linear fit: non-positive or non-finite value");
    const double x = t[i], v = std::log(y[i]);
    sx += x;
    sy += v;
    sxx += x * x;
    sxy += x * v;
    syy += v * v;
  }
  const double vxx = sxx - sx * sx / m, vxy = sxy - sx * sy / m, vyy = syy - sy * sy / m;
  if (!(vxx > 0)) throw FitError("log-linear fit: degenerate time window");
  const double slope = vxy / vxx;
  LogLinearFit f;
  f.omega = -slope;
  f.amplitude = std::exp((sy - slope * sx) / m);
  f.r2 = vyy > 0 ? (vxy * vxy) / (vxx * vyy) : 0.0;
  f.points = static_cast<int>(m);
  f.t_first = t[start];
  f.t_last = t.back();
  return f;
}

struct ConvergenceVerdict {
  bool converged = false;
  double final_distance = std::numeric_limits<double>::quiet_NaN();
  std::optional<LogLinearFit> fit;      ///< present when the fit could be computed
  std::optional<double> omega;          ///< reported only when fit R^2 >= min_r2
  std::optional<double> entered_half_eps;  ///< first time the distance is below epsilon/2
  std::string reason;
};

/// Pure function of a recorded distance series: converged iff the run
/// completed, the final distance is below epsilon, and the trailing-window
/// log-linear fit has R^2 >= min_r2 and a positive rate.
inline ConvergenceVerdict judge_convergence(const std::vector<double>& t, const std::vector<double>& dist,
                                            const std::string& status, const ExperimentConfig& ex) {
  ConvergenceVerdict v;
  if (dist.empty()) {
    v.reason = "empty series";
    return v;
  }
  v.final_distance = dist.back();
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (dist[i] < 0.5 * ex.epsilon) {
      v.entered_half_eps = t[i];
      break;
    }
  }
  try {
    v.fit = fit_log_linear(t, dist, ex.fit_fraction);
    if (v.fit->r2 >= ex.min_r2) v.omega = v.fit->omega;
  } catch (const FitError& e) {
    v.reason = e.what();
  }
  if (status != "completed") {
    v.reason = "run ended with status " + status;
  } else if (!(v.final_distance < ex.epsilon)) {
    v.reason = fmt::format("final distance {:.3e} >= epsilon {:.1e}", v.final_distance, ex.epsilon);
  } else if (!v.fit) {
    if (v.reason.empty()) v.reason = "no fit";
  } else if (!v.omega) {
    v.reason = fmt::format("fit R^2 = {:.4f} below {:.2f} over t in [{:.3g}, {:.3g}]", v.fit->r2, ex.min_r2,
                           v.fit->t_first, v.fit->t_last);
  } else if (!(*v.omega > 0)) {
    v.reason = fmt::format("fitted rate {:.3e} is not positive", *v.omega);
  } else {
    v.converged = true;
    v.reason = "converged";
  }
  return v;
}

/// Series re-read from a trajectory CSV written by format_trajectory_csv.
struct TrajectorySeries {
  std::vector<double> t, norm_c0, norm_c2, min_sec_t, einstein_residual, w_inf;
  std::string status;
};

inline TrajectorySeries parse_trajectory_csv(const std::string& text) {
  TrajectorySeries s;
  std::istringstream is(text);
  std::string line;
  bool header = false;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "t,norm_c0_mu,norm_c2_mu,min_secT,einstein_residual,w_inf,status")
        throw Error(fmt::format("trajectory CSV: unexpected header on line {}", lineno));
      header = true;
      continue;
    }
    std::array<double, 6> v{};
    std::istringstream ls(line);
    std::string cell;
    for (double& x : v) {
      if (!std::getline(ls, cell, ',')) throw Error(fmt::format("trajectory CSV: short record on line {}", lineno));
      x = std::stod(cell);
    }
    std::getline(ls, s.status);
    s.t.push_back(v[0]);
    s.norm_c0.push_back(v[1]);
    s.norm_c2.push_back(v[2]);
    s.min_sec_t.push_back(v[3]);
    s.einstein_residual.push_back(v[4]);
    s.w_inf.push_back(v[5]);
  }
  if (!header) throw Error("trajectory CSV: missing header");
  return s;
}

inline std::vector<double> c0_series(const FlowTrajectory& traj) {
  std::vector<double> out;
  for (const auto& d : traj.diagnostics) out.push_back(d.norm_c0);
  return out;
}

// --- perturbation library ------------------------------------------------------------

enum class BumpComponent { radial, angular, both };

/// Frame perturbation rho^mu exp(-(r - center)^2 / (2 width^2)) in the chosen components.
struct Bump {
  BumpComponent component = BumpComponent::radial;
  double center = 2.0;
  double width = 0.5;
  std::string id() const {
    const char* c = component == BumpComponent::radial ? "rr" : component == BumpComponent::angular ? "sph" : "both";
    return fmt::format("bump-{}-c{:g}-w{:g}", c, center, width);
  }
};

inline std::vector<Bump> standard_bumps() {
  return {{BumpComponent::radial, 2.0, 0.5},
          {BumpComponent::angular, 2.5, 0.5},
          {BumpComponent::both, 3.0, 0.75},
          {BumpComponent::radial, 4.0, 1.0},
          {BumpComponent::angular, 1.75, 0.35}};
}

/// The bump as a coordinate perturbation of `base`, scaled to unit weighted
/// C^k_mu norm (measured in the frame of base).
inline MetricPerturbation unit_bump(const RotSymMetric& base, const Bump& b, const WeightedNormParams& norm) {
  const BoundaryWeight w(base.grid());
  auto p = MetricPerturbation::zero(base.grid());
  for (int i = 1; i < base.size() - 1; ++i) {
    const double r = base.grid().r(i);
    const double v = std::pow(w[i], norm.mu) * std::exp(-(r - b.center) * (r - b.center) / (2.0 * b.width * b.width));
    if (b.component != BumpComponent::angular) p.h_rr[i] = v * base.phi()[i] * base.phi()[i];
    if (b.component != BumpComponent::radial) p.h_sph[i] = v * base.psi()[i] * base.psi()[i];
  }
  const double size = weighted_norm(base, p, norm, w);
  if (!(size > 0)) throw PreconditionError("unit_bump: bump vanishes on the grid");
  p *= 1.0 / size;
  return p;
}

// --- profile families ------------------------------------------------------------

/// w(r) = amplitude r^2 exp(-(r / width)^2).
struct BumpProfile {
  double amplitude = 1.0;
  double width = 1.0;
  double operator()(double r) const { return amplitude * r * r * std::exp(-(r / width) * (r / width)); }
};

/// Deterministic draws with amplitude in [0.1, 1] and width in [0.6, 1.2];
/// on this range w^2 <= sinh^2 r, so every member has sec_T < 0.
inline std::vector<BumpProfile> random_profiles(std::uint64_t seed, int count) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(0.1, 1.0), width(0.6, 1.2);
  std::vector<BumpProfile> out;
  for (int i = 0; i < count; ++i) {
    const double a = amp(rng);
    out.push_back({a, width(rng)});
  }
  return out;
}

inline RotSymMetric profile_metric(const RadialGrid& grid, const BumpProfile& w, double mu) {
  return from_profile(grid, sample(grid, [&w](double r) { return w(r); }), mu).metric;
}

// --- experiments ----------------------------------------------------------------------

struct StabilityReport {
  std::string base_id;
  std::string perturbation_id;
  double delta = 0.0;
  ConvergenceVerdict verdict;
  FlowTrajectory trajectory;
};

/// Normalized flow from g0 to ex.t_end, judged by judge_convergence on the
/// weighted C^0 distance to g_h. Requires g0 to be admissible with
/// min sec_T < 0.
inline StabilityReport convergence_experiment(const std::string& id, const RotSymMetric& g0, const ExperimentConfig& ex) {
  const auto adm = check_ah_admissible(g0, {ex.norm.mu, 0});
  if (!adm.admissible())
    throw PreconditionError(fmt::format("convergence_experiment: {} is not admissible (min sec_T = {:.4g})", id,
                                        adm.min_sec_t));
  StabilityReport rep;
  rep.base_id = id;
  rep.perturbation_id = "none";
  rep.trajectory = run_flow(g0, make_flow_config(g0, ex, ex.t_end));
  rep.verdict = judge_convergence(rep.trajectory.times, c0_series(rep.trajectory), to_string(rep.trajectory.status), ex);
  return rep;
}

/// Flow from g_star + delta p. Only g_star must satisfy the curvature
/// hypothesis; the perturbed metric need not.
inline StabilityReport convergence_stability_experiment(const std::string& base_id, const RotSymMetric& g_star,
                                                        const Bump& bump, double delta, const ExperimentConfig& ex) {
  const auto adm = check_ah_admissible(g_star, {ex.norm.mu, 0});
  if (!adm.admissible()) throw PreconditionError("convergence_stability_experiment: base metric is not admissible");
  auto p = unit_bump(g_star, bump, ex.norm);
  p *= delta;
  const auto g0 = add(g_star, p);
  StabilityReport rep;
  rep.base_id = base_id;
  rep.perturbation_id = bump.id();
  rep.delta = delta;
  rep.trajectory = run_flow(g0, make_flow_config(g0, ex, ex.t_end));
  rep.verdict = judge_convergence(rep.trajectory.times, c0_series(rep.trajectory), to_string(rep.trajectory.status), ex);
  return rep;
}

struct DependenceReport {
  double tau = 0;
  std::vector<double> deltas;
  std::vector<std::optional<double>> ratios;  ///< sup over [tau/2, tau]; empty when the run failed
  std::vector<std::string> statuses;
  bool degenerate_request = false;            ///< the perturbation has zero norm
  double spread = std::numeric_limits<double>::quiet_NaN();  ///< relative spread over the two smallest deltas
  bool pass = false;
};

/// Ratios sup_{t in [tau/2, tau]} |g_1(t) - g_0(t)| / |g_1 - g_0| in the
/// weighted C^k_mu norm (k = ex.norm.k), for g_1 = g0 + delta p. Passes when
/// the ratios of the two smallest deltas differ by less than 50%.
inline DependenceReport continuous_dependence_sweep(const RotSymMetric& g0, const MetricPerturbation& p,
                                                    std::vector<double> deltas, double tau, const ExperimentConfig& ex) {
  DependenceReport rep;
  rep.tau = tau;
  std::sort(deltas.begin(), deltas.end(), std::greater<>());
  rep.deltas = deltas;
  const BoundaryWeight w(g0.grid());
  if (!(weighted_norm(g0, p, ex.norm, w) > 0)) {
    rep.degenerate_request = true;
    return rep;
  }
  ExperimentConfig local = ex;
  local.record_interval = std::min(ex.record_interval, tau / 20.0);
  const auto base = run_flow(g0, make_flow_config(g0, local, tau));
  if (base.status != FlowStatus::completed) {
    rep.statuses.assign(deltas.size(), std::string("base run ") + to_string(base.status));
    rep.ratios.assign(deltas.size(), std::nullopt);
    return rep;
  }
  for (double d : deltas) {
    auto q = p;
    q *= d;
    const auto g1 = add(g0, q);
    const double initial = weighted_distance(g1, g0, g0, ex.norm, w);
    // identical steps and record times as the base run
    auto cfg = make_flow_config(g0, local, tau);
    const auto run = run_flow(g1, cfg);
    rep.statuses.push_back(to_string(run.status));
    if (run.status != FlowStatus::completed || run.times.size() != base.times.size()) {
      rep.ratios.push_back(std::nullopt);
      continue;
    }
    double sup = 0.0;
    for (std::size_t k = 0; k < run.times.size(); ++k) {
      if (run.times[k] < 0.5 * tau - 1e-12) continue;
      sup = std::max(sup, weighted_distance(run.snapshots[k], base.snapshots[k], g0, ex.norm, w));
    }
    rep.ratios.push_back(sup / initial);
  }
  const std::size_t n = rep.ratios.size();
  if (n >= 2 && rep.ratios[n - 1] && rep.ratios[n - 2]) {
    const double a = *rep.ratios[n - 1], b = *rep.ratios[n - 2];
    rep.spread = std::abs(a - b) / std::min(a, b);
    rep.pass = std::isfinite(a) && std::isfinite(b) && rep.spread < 0.5;
  }
  return rep;
}

struct GaugeLevel {
  double h = 0, dt = 0;
  double discrepancy = 0;          ///< direct RF vs single-segment recovery at tau
  double chained_discrepancy = 0;  ///< multi-segment vs single-segment recovery at tau
  double seconds = 0;
};

struct GaugeConsistencyReport {
  double tau = 0;
  int segments = 1;
  std::vector<GaugeLevel> levels;
  double order = std::numeric_limits<double>::quiet_NaN();  ///< least-squares slope of log discrepancy vs log h
  bool monotone = false;
  std::string failure;  ///< non-empty when a run or gauge recovery failed
};

/// For each spacing in `spacings` (dt from the CFL rule, so dt ~ h^2): runs
/// the normalized ungauged flow directly and via Ricci-DeTurck plus gauge
/// recovery (one segment and `segments` segments) and measures weighted C^0
/// discrepancies at tau.
inline GaugeConsistencyReport gauge_consistency_check(const std::function<RotSymMetric(const RadialGrid&)>& make_g0,
                                                      int n_dim, double r_max, const std::vector<double>& spacings,
                                                      double tau, int segments, const ExperimentConfig& ex) {
  if (spacings.size() < 2) throw PreconditionError("gauge_consistency_check: need at least two refinement levels");
  if (segments < 1) throw PreconditionError("gauge_consistency_check: segments must be >= 1");
  GaugeConsistencyReport rep;
  rep.tau = tau;
  rep.segments = segments;
  const WeightedNormParams c0{ex.norm.mu, 0};
  for (double h : spacings) {
    const auto start = std::chrono::steady_clock::now();
    const auto grid = RadialGrid::with_spacing(n_dim, r_max, h);
    const auto g0 = make_g0(grid);
    ExperimentConfig rf = ex;
    rf.kind = FlowKind::ricci;
    auto cfg = make_flow_config(g0, rf, tau);
    // restarted segments see a smaller min phi than g0, so keep a margin below the bound
    cfg.dt *= 0.5;
    cfg.record_every = std::numeric_limits<int>::max();
    const auto direct = run_flow(g0, cfg);
    // the gauge ODE is sampled every ~record_interval/10 of flow time
    FlowConfig seg_cfg = cfg;
    seg_cfg.gauge_every = std::max(1, static_cast<int>(std::lround(ex.record_interval / 10.0 / cfg.dt)));
    seg_cfg.record_every = seg_cfg.gauge_every * 1000000;
    auto partition = [&](int n) {
      std::vector<double> p;
      for (int i = 0; i <= n; ++i) p.push_back(tau * i / n);
      return p;
    };
    const auto single = chained_rdtf(g0, partition(1), seg_cfg);
    const auto chained = chained_rdtf(g0, partition(segments), seg_cfg);
    for (const auto* t : {&direct, &single.trajectory, &chained.trajectory}) {
      if (t->status != FlowStatus::completed) {
        rep.failure = fmt::format("h = {}: run ended with status {}{}", h, to_string(t->status),
                                  t->failure ? ": " + t->failure->what : "");
        return rep;
      }
    }
    const BoundaryWeight w(grid);
    const auto gh = hyperbolic_metric(grid);
    GaugeLevel lv;
    lv.h = h;
    lv.dt = cfg.dt;
    lv.discrepancy = weighted_distance(direct.final_metric(), single.trajectory.final_metric(), gh, c0, w);
    lv.chained_discrepancy =
        weighted_distance(chained.trajectory.final_metric(), single.trajectory.final_metric(), gh, c0, w);
    lv.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rep.levels.push_back(lv);
  }
  Eigen::MatrixXd X(rep.levels.size(), 2);
  Eigen::VectorXd Y(rep.levels.size());
  rep.monotone = true;
  for (std::size_t i = 0; i < rep.levels.size(); ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = std::log(rep.levels[i].h);
    Y[i] = std::log(rep.levels[i].discrepancy);
    if (i > 0 && rep.levels[i].h < rep.levels[i - 1].h && !(rep.levels[i].discrepancy < rep.levels[i - 1].discrepancy))
      rep.monotone = false;
  }
  if (Y.allFinite()) rep.order = X.colPivHouseholderQr().solve(Y)[1];
  return rep;
}

struct CurvatureScanRow {
  double amplitude = 0;
  double min_sec_t = 0;
  double distance = 0;  ///< weighted C^0_mu distance to g_h
  bool admissible = false;
};

/// min sec_T and weighted distance to g_h along w_A = A r^2 exp(-r^2).
inline std::vector<CurvatureScanRow> curvature_condition_scan(const RadialGrid& grid, const std::vector<double>& amplitudes,
                                                              double mu) {
  std::vector<CurvatureScanRow> rows;
  for (double A : amplitudes) {
    const auto prof = from_profile(grid, sample(grid, [A](double r) { return gaussian_bump_profile(A, r); }), mu);
    const auto rep = check_ah_admissible(prof.metric, {mu, 0});
    rows.push_back({A, rep.min_sec_t, rep.distance_to_hyperbolic, rep.admissible()});
  }
  return rows;
}

}  // namespace ahflow

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <fmt/format.h>

#include "ahflow/curvature.hpp"
#include "ahflow/error.hpp"
#include "ahflow/grid.hpp"
#include "ahflow/metric.hpp"
#include "ahflow/norms.hpp"

namespace ahflow {

// --- right-hand sides -------------------------------------------------------

namespace detail {

/// psi / r, with psi'(0) (odd extension, fourth order) at the origin.
inline std::vector<double> warp_quotient(const RadialGrid& grid, const std::vector<double>& psi) {
  std::vector<double> a(psi.size());
  a[0] = (8.0 * psi[1] - psi[2]) / (6.0 * grid.spacing());
  for (int i = 1; i < grid.size(); ++i) a[i] = psi[i] / grid.r(i);
  return a;
}

/// Terms of the DeTurck field that depend only on the reference metric.
struct ReferenceTerms {
  std::vector<double> phi;  ///< phi~
  std::vector<double> c;    ///< phi~_r / phi~
  std::vector<double> dc;   ///< (phi~_r / phi~)_r
  std::vector<double> a;    ///< psi~ / r
  std::vector<double> a_r;  ///< (psi~ / r)_r

  explicit ReferenceTerms(const RotSymMetric& ref) : phi(ref.phi()) {
    const RadialDifferentiator diff(ref.grid());
    const auto phi_r = diff.first(ref.phi(), Parity::even);
    const auto phi_rr = diff.second(ref.phi(), Parity::even);
    const int n = ref.size();
    c.resize(n);
    dc.resize(n);
    for (int i = 0; i < n; ++i) {
      c[i] = phi_r[i] / phi[i];
      dc[i] = phi_rr[i] / phi[i] - c[i] * c[i];
    }
    a = warp_quotient(ref.grid(), ref.psi());
    a_r = diff.first(a, Parity::even);
  }
};

/// Pointwise evaluation of the (gauged or ungauged, normalized or not) Ricci
/// flow speed on raw samples. Interior nodes only; node 0 and the last node
/// are left at zero.
///
/// With a = psi/r the DeTurck field is written as
///   W = phi_r/phi^3 - c/phi^2 + (n-1) (B/r + T),
///   B = a~^2/(a^2 phi~^2) - 1/phi^2,  T = a~ a~_r/(a^2 phi~^2) - a_r/(a phi^2),
/// which is algebraically the Christoffel expression but keeps the 1/r
/// cancellation at the origin on exact point values of B.
class FlowOperator {
 public:
  FlowOperator(const RadialGrid& grid, const RotSymMetric* reference, bool normalized)
      : grid_(grid), diff_(grid), normalized_(normalized) {
    if (reference) {
      require_same_grid(grid, reference->grid(), "flow operator");
      if (auto d = reference->degeneracy()) throw DegenerateMetricError(d->node, "reference metric: " + d->what);
      ref_.emplace(*reference);
    }
  }

  bool gauged() const noexcept { return ref_.has_value(); }
  const RadialGrid& grid() const noexcept { return grid_; }

  struct Speed {
    std::vector<double> h_rr, h_sph;  ///< coordinate components of dg/dt
    std::vector<double> w;            ///< radial DeTurck component (zero if ungauged)
  };

  Speed evaluate(const std::vector<double>& phi, const std::vector<double>& psi) const {
    const int n = grid_.size();
    const int dim = grid_.dim();
    const auto phi_r = diff_.first(phi, Parity::even);
    const auto psi_r = diff_.first(psi, Parity::odd);
    const auto psi_rr = diff_.second(psi, Parity::odd);
    Speed out{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    GaugeTerms gt;
    if (ref_) {
      gt = gauge_terms(phi, psi, phi_r);
      out.w = gt.w;
    }
    // phi is transported outward at speed (n-1) psi_r/(phi^2 psi) by the
    // ungauged radial equation; an upwind-biased phi_r keeps that stable.
    const auto phi_adv = ref_ ? phi_r : diff_.upwind_first(phi, Parity::even);
    for (int i = 1; i < n - 1; ++i) {
      const double f = phi[i], p = psi[i];
      const double fr = phi_r[i], pr = psi_r[i], prr = psi_rr[i];
      const double f2 = f * f, f3 = f2 * f;
      const double q = pr / f;
      const double ric_rr = -(dim - 1) * (prr / p - phi_adv[i] * pr / (f * p));
      const double ric_sph = -p * prr / f2 + p * pr * fr / f3 + (dim - 2) * (1.0 - q) * (1.0 + q);
      double hrr = -2.0 * ric_rr;
      double hsph = -2.0 * ric_sph;
      if (ref_) {
        hrr += 2.0 * f2 * gt.dw[i] + 2.0 * f * fr * gt.w[i];
        hsph += 2.0 * p * pr * gt.w[i];
      }
      if (normalized_) {
        hrr -= 2.0 * (dim - 1) * f2;
        hsph -= 2.0 * (dim - 1) * p * p;
      }
      out.h_rr[i] = hrr;
      out.h_sph[i] = hsph;
    }
    return out;
  }

  /// Radial DeTurck component at every node (zero at the origin).
  std::vector<double> deturck(const std::vector<double>& phi, const std::vector<double>& psi) const {
    if (!ref_) return std::vector<double>(grid_.size(), 0.0);
    return gauge_terms(phi, psi, diff_.first(phi, Parity::even)).w;
  }

 private:
  struct GaugeTerms {
    std::vector<double> w, dw;
  };

  GaugeTerms gauge_terms(const std::vector<double>& phi, const std::vector<double>& psi,
                         const std::vector<double>& phi_r) const {
    const auto& R = *ref_;
    const int n = grid_.size();
    const int dim = grid_.dim();
    const auto phi_rr = diff_.second(phi, Parity::even);
    const auto a = warp_quotient(grid_, psi);
    const auto a_r = diff_.first(a, Parity::even);
    std::vector<double> B(n), T(n);
    for (int i = 0; i < n; ++i) {
      const double f2 = phi[i] * phi[i];
      const double rf2 = R.phi[i] * R.phi[i];
      const double ra2 = R.a[i] * R.a[i];
      const double a2 = a[i] * a[i];
      B[i] = ra2 / (a2 * rf2) - 1.0 / f2;
      T[i] = R.a[i] * R.a_r[i] / (a2 * rf2) - a_r[i] / (a[i] * f2);
    }
    const auto B_r = diff_.first(B, Parity::even);
    const auto T_r = diff_.first(T, Parity::odd);
    GaugeTerms out{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    for (int i = 1; i < n; ++i) {
      const double f = phi[i], fr = phi_r[i], r = grid_.r(i);
      const double f2 = f * f, f3 = f2 * f;
      out.w[i] = fr / f3 - R.c[i] / f2 + (dim - 1) * (B[i] / r + T[i]);
      out.dw[i] = phi_rr[i] / f3 - 3.0 * fr * fr / (f2 * f2) - R.dc[i] / f2 + 2.0 * R.c[i] * fr / f3 +
                  (dim - 1) * (B_r[i] / r - B[i] / (r * r) + T_r[i]);
    }
    return out;
  }

  RadialGrid grid_;
  RadialDifferentiator diff_;
  bool normalized_;
  std::optional<ReferenceTerms> ref_;
};

}  // namespace detail

/// -2 Ric(g), minus 2(n-1) g when normalized.
inline MetricPerturbation rf_rhs(const RotSymMetric& g, bool normalized) {
  const detail::FlowOperator op(g.grid(), nullptr, normalized);
  auto s = op.evaluate(g.phi(), g.psi());
  return {g.grid(), std::move(s.h_rr), std::move(s.h_sph)};
}

/// Radial component W^r of W^k = g^{pq}(Gamma^k_pq(g) - Gamma^k_pq(ref)):
///   W^r = phi_r/phi^3 - (n-1) psi_r/(psi phi^2) - phi~_r/(phi~ phi^2) + (n-1) psi~ psi~_r/(phi~^2 psi^2).
/// Angular components vanish identically by symmetry.
inline std::vector<double> deturck_vector(const RotSymMetric& g, const RotSymMetric& ref) {
  const detail::FlowOperator op(g.grid(), &ref, false);
  return op.deturck(g.phi(), g.psi());
}

/// -2 Ric(g) + L_W g (minus 2(n-1) g when normalized), with
/// (L_W g)_rr = 2 phi^2 W_r' + (phi^2)' W and (L_W g)_sph = (psi^2)' W.
inline MetricPerturbation rdtf_rhs(const RotSymMetric& g, const RotSymMetric& ref, bool normalized) {
  const detail::FlowOperator op(g.grid(), &ref, normalized);
  auto s = op.evaluate(g.phi(), g.psi());
  return {g.grid(), std::move(s.h_rr), std::move(s.h_sph)};
}

// --- time integration -------------------------------------------------------

enum class Integrator { rk4, semi_implicit };

inline const char* to_string(Integrator i) { return i == Integrator::rk4 ? "explicit-rk4" : "semi-implicit"; }

struct FlowConfig {
  bool normalized = true;
  double dt = 0.0;
  double t_end = 1.0;
  Integrator integrator = Integrator::rk4;
  double cfl_safety = 0.5;
  std::optional<RotSymMetric> reference;  ///< present => Ricci-DeTurck flow
  int record_every = 100;                 ///< snapshot cadence in steps
  int gauge_every = 0;                    ///< DeTurck history cadence in steps (0: none)
  WeightedNormParams norm{1.0, 2};        ///< weights for the distance diagnostics

  void validate() const {
    if (!(dt > 0)) throw PreconditionError("flow: dt must be positive");
    if (!(t_end > 0)) throw PreconditionError("flow: t_end must be positive");
    if (!(cfl_safety > 0 && cfl_safety <= 1)) throw PreconditionError("flow: cfl_safety must lie in (0, 1]");
    if (record_every < 1) throw PreconditionError("flow: record_every must be >= 1");
    if (gauge_every < 0) throw PreconditionError("flow: gauge_every must be >= 0");
  }
};

/// Largest explicit step allowed by dt <= cfl h^2 min(phi^2) / 2.
inline double stable_dt(const RotSymMetric& g, double cfl_safety) {
  const double h = g.grid().spacing();
  const double m = *std::min_element(g.phi().begin(), g.phi().end());
  return cfl_safety * h * h * m * m / 2.0;
}

struct FlowState {
  double t = 0.0;
  RotSymMetric metric;
  std::vector<double> w;  ///< radial DeTurck field; empty for ungauged runs
};

namespace detail {

/// Imposes psi(0) = 0, phi(0) = psi'(0) and hyperbolic values at r_max.
inline void impose_boundary(const RadialGrid& grid, std::vector<double>& phi, std::vector<double>& psi) {
  const int n = grid.size();
  psi[0] = 0.0;
  phi[0] = (8.0 * psi[1] - psi[2]) / (6.0 * grid.spacing());
  phi[n - 1] = 1.0;
  psi[n - 1] = std::sinh(grid.r_max());
}

class Stepper {
 public:
  Stepper(const RadialGrid& grid, const FlowConfig& cfg)
      : grid_(grid), cfg_(cfg), op_(grid, cfg.reference ? &*cfg.reference : nullptr, cfg.normalized), diff_(grid) {}

  const FlowOperator& op() const noexcept { return op_; }

  /// Advances (phi, psi) by dt in place.
  void advance(std::vector<double>& phi, std::vector<double>& psi, double dt) const {
    if (cfg_.integrator == Integrator::rk4) {
      rk4(phi, psi, dt);
    } else {
      semi_implicit(phi, psi, dt);
    }
  }

 private:
  void rates(const std::vector<double>& phi, const std::vector<double>& psi, std::vector<double>& dphi,
             std::vector<double>& dpsi) const {
    const auto s = op_.evaluate(phi, psi);
    const int n = grid_.size();
    dphi.assign(n, 0.0);
    dpsi.assign(n, 0.0);
    for (int i = 1; i < n - 1; ++i) {
      dphi[i] = s.h_rr[i] / (2.0 * phi[i]);
      dpsi[i] = s.h_sph[i] / (2.0 * psi[i]);
    }
  }

  void rk4(std::vector<double>& phi, std::vector<double>& psi, double dt) const {
    const int n = grid_.size();
    std::vector<double> k1f, k1p, k2f, k2p, k3f, k3p, k4f, k4p;
    std::vector<double> tf(phi), tp(psi);
    auto stage = [&](const std::vector<double>& kf, const std::vector<double>& kp, double c) {
      for (int i = 1; i < n - 1; ++i) {
        tf[i] = phi[i] + c * dt * kf[i];
        tp[i] = psi[i] + c * dt * kp[i];
      }
      impose_boundary(grid_, tf, tp);
    };
    rates(phi, psi, k1f, k1p);
    stage(k1f, k1p, 0.5);
    rates(tf, tp, k2f, k2p);
    stage(k2f, k2p, 0.5);
    rates(tf, tp, k3f, k3p);
    stage(k3f, k3p, 1.0);
    rates(tf, tp, k4f, k4p);
    for (int i = 1; i < n - 1; ++i) {
      phi[i] += dt / 6.0 * (k1f[i] + 2 * k2f[i] + 2 * k3f[i] + k4f[i]);
      psi[i] += dt / 6.0 * (k1p[i] + 2 * k2p[i] + 2 * k3p[i] + k4p[i]);
    }
    impose_boundary(grid_, phi, psi);
  }

  /// Backward Euler on c(r) u_rr (c = 1/phi^2, lagged), forward Euler on the rest.
  void semi_implicit(std::vector<double>& phi, std::vector<double>& psi, double dt) const {
    const int n = grid_.size();
    std::vector<double> dphi, dpsi;
    rates(phi, psi, dphi, dpsi);
    std::vector<double> coef(n);
    for (int i = 0; i < n; ++i) coef[i] = 1.0 / (phi[i] * phi[i]);
    const auto phi_rr = diff_.second(phi, Parity::even);
    const auto psi_rr = diff_.second(psi, Parity::odd);
    std::vector<double> phi_new(phi), psi_new(psi);
    if (op_.gauged()) {
      implicit_solve(phi, dphi, phi_rr, coef, Parity::even, dt, phi_new);
    } else {
      for (int i = 1; i < n - 1; ++i) phi_new[i] = phi[i] + dt * dphi[i];
    }
    implicit_solve(psi, dpsi, psi_rr, coef, Parity::odd, dt, psi_new);
    phi = std::move(phi_new);
    psi = std::move(psi_new);
    impose_boundary(grid_, phi, psi);
  }

  void implicit_solve(const std::vector<double>& u, const std::vector<double>& rate, const std::vector<double>& u_rr,
                      const std::vector<double>& coef, Parity parity, double dt, std::vector<double>& out) const {
    const int n = grid_.size();
    const int m = n - 2;  // unknowns at nodes 1..n-2
    const double inv_h2 = 1.0 / (grid_.spacing() * grid_.spacing());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(m) * 5);
    Eigen::VectorXd rhs(m);
    for (int i = 1; i < n - 1; ++i) {
      const int row = i - 1;
      double b = u[i] + dt * (rate[i] - coef[i] * u_rr[i]);
      trip.emplace_back(row, row, 1.0);
      const auto st = diff_.stencil(i, 2, parity);
      for (int k = 0; k < 5; ++k) {
        int j = i + st.first_offset + k;
        double w = -dt * coef[i] * st.w[k] * inv_h2;
        if (j < 0) {
          if (parity == Parity::odd) w = -w;
          j = -j;
        }
        if (j == 0 || j == n - 1) {
          b -= w * u[j];  // known (lagged) value
        } else {
          trip.emplace_back(row, j - 1, w);
        }
      }
      rhs[row] = b;
    }
    Eigen::SparseMatrix<double> A(m, m);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw Error("semi-implicit step: factorization failed");
    const Eigen::VectorXd x = lu.solve(rhs);
    for (int i = 1; i < n - 1; ++i) out[i] = x[i - 1];
  }

  RadialGrid grid_;
  const FlowConfig& cfg_;
  FlowOperator op_;
  RadialDifferentiator diff_;
};

inline void check_explicit_bound(const RotSymMetric& g, const FlowConfig& cfg, double dt) {
  if (cfg.integrator != Integrator::rk4) return;
  const double bound = stable_dt(g, cfg.cfl_safety);
  if (dt > bound * (1.0 + 1e-12))
    throw PreconditionError(fmt::format("explicit step dt = {:.6g} exceeds the stability bound {:.6g}", dt, bound));
}

}  // namespace detail

/// One accepted step of the configured flow. Throws PreconditionError when an
/// explicit dt violates the stability bound and DegenerateMetricError when the
/// new metric loses positivity or finiteness.
inline FlowState step(const FlowState& state, const FlowConfig& cfg) {
  cfg.validate();
  detail::check_explicit_bound(state.metric, cfg, cfg.dt);
  const detail::Stepper stepper(state.metric.grid(), cfg);
  std::vector<double> phi = state.metric.phi(), psi = state.metric.psi();
  detail::impose_boundary(state.metric.grid(), phi, psi);
  stepper.advance(phi, psi, cfg.dt);
  auto g = RotSymMetric::unchecked(state.metric.grid(), std::move(phi), std::move(psi));
  if (auto d = g.degeneracy()) throw DegenerateMetricError(d->node, d->what);
  FlowState next{state.t + cfg.dt, std::move(g), {}};
  if (stepper.op().gauged()) next.w = stepper.op().deturck(next.metric.phi(), next.metric.psi());
  return next;
}

// --- trajectories -------------------------------------------------------------

enum class FlowStatus { completed, degenerated, blow_up, gauge_failure };

inline const char* to_string(FlowStatus s) {
  switch (s) {
    case FlowStatus::completed: return "completed";
    case FlowStatus::degenerated: return "degenerated";
    case FlowStatus::blow_up: return "blow-up";
    case FlowStatus::gauge_failure: return "gauge-failure";
  }
  return "unknown";
}

struct Diagnostics {
  double norm_c0 = 0;            ///< weighted C^0_mu distance to g_h
  double norm_c2 = 0;            ///< weighted C^2_mu distance to g_h
  double min_sec_t = 0;
  double einstein_residual = 0;  ///< max |Ric + (n-1) g| in the orthonormal frame
  double w_inf = 0;              ///< sup |W^r| (0 for ungauged runs)
};

inline Diagnostics diagnose(const RotSymMetric& g, const std::vector<double>& w, const WeightedNormParams& norm) {
  const auto gh = hyperbolic_metric(g.grid());
  const BoundaryWeight weight(g.grid());
  const auto diff = difference(g, gh);
  Diagnostics d;
  d.norm_c0 = weighted_norm(gh, diff, {norm.mu, 0}, weight);
  d.norm_c2 = weighted_norm(gh, diff, {norm.mu, 2}, weight);
  d.min_sec_t = min_sectional_tangential(g);
  d.einstein_residual = einstein_residual(g);
  for (double v : w) d.w_inf = std::max(d.w_inf, std::abs(v));
  return d;
}

/// Time-indexed samples of the radial DeTurck field.
struct DeTurckHistory {
  std::vector<double> times;
  std::vector<std::vector<double>> samples;
};

struct FlowTrajectory {
  std::vector<double> times;
  std::vector<RotSymMetric> snapshots;
  std::vector<Diagnostics> diagnostics;
  FlowStatus status = FlowStatus::completed;
  std::optional<Degeneracy> failure;  ///< set when status != completed
  DeTurckHistory w_history;           ///< filled when cfg.gauge_every > 0 on gauged runs

  const RotSymMetric& final_metric() const { return snapshots.back(); }
};

/// Integrates the configured flow from g0 to cfg.t_end, recording snapshots
/// every cfg.record_every steps and at the final time. Degeneracy or blow-up
/// ends the run early with the corresponding status.
inline FlowTrajectory run_flow(const RotSymMetric& g0, const FlowConfig& cfg) {
  cfg.validate();
  if (cfg.reference) require_same_grid(g0.grid(), cfg.reference->grid(), "run_flow");
  FlowTrajectory traj;
  if (auto d = g0.degeneracy()) {
    traj.status = d->non_finite ? FlowStatus::blow_up : FlowStatus::degenerated;
    traj.failure = d;
    return traj;
  }
  const RadialGrid& grid = g0.grid();
  const long steps = std::max<long>(1, static_cast<long>(std::ceil(cfg.t_end / cfg.dt - 1e-9)));
  const double dt = cfg.t_end / static_cast<double>(steps);
  detail::check_explicit_bound(g0, cfg, dt);

  const detail::Stepper stepper(grid, cfg);
  std::vector<double> phi = g0.phi(), psi = g0.psi();
  detail::impose_boundary(grid, phi, psi);

  auto record = [&](double t, const RotSymMetric& g) {
    const auto w = stepper.op().deturck(g.phi(), g.psi());
    traj.times.push_back(t);
    traj.snapshots.push_back(g);
    traj.diagnostics.push_back(diagnose(g, w, cfg.norm));
  };
  auto record_w = [&](double t) {
    traj.w_history.times.push_back(t);
    traj.w_history.samples.push_back(stepper.op().deturck(phi, psi));
  };

  record(0.0, RotSymMetric::unchecked(grid, phi, psi));
  const bool track_w = stepper.op().gauged() && cfg.gauge_every > 0;
  if (track_w) record_w(0.0);

  for (long k = 1; k <= steps; ++k) {
    stepper.advance(phi, psi, dt);
    auto g = RotSymMetric::unchecked(grid, phi, psi);
    if (auto d = g.degeneracy()) {
      traj.status = d->non_finite ? FlowStatus::blow_up : FlowStatus::degenerated;
      traj.failure = d;
      return traj;
    }
    const double t = k == steps ? cfg.t_end : static_cast<double>(k) * dt;
    if (track_w && (k % cfg.gauge_every == 0 || k == steps)) record_w(t);
    if (k % cfg.record_every == 0 || k == steps) record(t, g);
  }
  return traj;
}

/// "t,norm_c0_mu,norm_c2_mu,min_secT,einstein_residual,w_inf,status", one
/// record per snapshot, preceded by a "# ..." metadata line.
inline std::string format_trajectory_csv(const FlowTrajectory& traj, const std::string& metadata) {
  std::string out = "# " + metadata + "\n";
  out += "t,norm_c0_mu,norm_c2_mu,min_secT,einstein_residual,w_inf,status\n";
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const auto& d = traj.diagnostics[i];
    const bool last = i + 1 == traj.times.size();
    out += fmt::format("{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{}\n", traj.times[i], d.norm_c0, d.norm_c2,
                       d.min_sec_t, d.einstein_residual, d.w_inf, last ? to_string(traj.status) : "running");
  }
  return out;
}

}  // namespace ahflow

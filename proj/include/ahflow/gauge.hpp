#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "ahflow/error.hpp"
#include "ahflow/flow.hpp"
#include "ahflow/grid.hpp"
#include "ahflow/metric.hpp"

namespace ahflow {

/// Radial diffeomorphism surrogate: Phi sampled at the grid nodes, with
/// Phi(0) = 0 and Phi(r_max) = r_max.
class GaugeMap {
 public:
  GaugeMap(RadialGrid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (static_cast<int>(values_.size()) != grid_.size()) throw PreconditionError("gauge map: sample count does not match grid");
  }

  static GaugeMap identity(const RadialGrid& grid) { return {grid, grid.nodes()}; }

  const RadialGrid& grid() const noexcept { return grid_; }
  const std::vector<double>& values() const noexcept { return values_; }
  double operator[](int i) const noexcept { return values_[i]; }

  /// First node i with Phi(i) <= Phi(i-1), or -1 when strictly increasing.
  int monotonicity_defect() const noexcept {
    for (std::size_t i = 1; i < values_.size(); ++i)
      if (!(values_[i] > values_[i - 1])) return static_cast<int>(i);
    return -1;
  }
  bool increasing() const noexcept { return monotonicity_defect() < 0; }

  /// sup_i |Phi(r_i) - r_i|
  double displacement() const noexcept {
    double m = 0.0;
    for (int i = 0; i < grid_.size(); ++i) m = std::max(m, std::abs(values_[i] - grid_.r(i)));
    return m;
  }

  /// Continuous evaluation by monotone cubic interpolation.
  MonotoneCubic interpolant() const { return {grid_.nodes(), values_}; }

 private:
  RadialGrid grid_;
  std::vector<double> values_;
};

inline double sup_distance(const GaugeMap& a, const GaugeMap& b) {
  require_same_grid(a.grid(), b.grid(), "gauge map distance");
  double m = 0.0;
  for (int i = 0; i < a.grid().size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

namespace detail {

inline void require_increasing(const GaugeMap& phi, const char* where) {
  if (const int i = phi.monotonicity_defect(); i >= 0)
    throw GaugeFailure(fmt::format("{}: gauge map is not increasing at node {}", where, i));
}
}  // namespace detail

/// Phi^{-1}, sampled at the nodes.
inline GaugeMap inverse(const GaugeMap& phi) {
  detail::require_increasing(phi, "inverse");
  const MonotoneCubic inv(phi.values(), phi.grid().nodes());
  std::vector<double> out(phi.grid().size());
  for (int i = 0; i < phi.grid().size(); ++i) out[i] = inv(phi.grid().r(i));
  return {phi.grid(), std::move(out)};
}

/// outer o inner.
inline GaugeMap compose(const GaugeMap& outer, const GaugeMap& inner) {
  require_same_grid(outer.grid(), inner.grid(), "compose");
  const auto f = outer.interpolant();
  std::vector<double> out(inner.grid().size());
  for (int i = 0; i < inner.grid().size(); ++i) out[i] = f(inner[i]);
  return {inner.grid(), std::move(out)};
}

/// Phi^* g: phi_hat(r) = phi(Phi(r)) Phi'(r), psi_hat(r) = psi(Phi(r)).
inline RotSymMetric pullback(const RotSymMetric& g, const GaugeMap& phi) {
  require_same_grid(g.grid(), phi.grid(), "pullback");
  detail::require_increasing(phi, "pullback");
  const HermiteInterpolant f(g.grid(), g.phi(), Parity::even);
  const HermiteInterpolant p(g.grid(), g.psi(), Parity::odd);
  const auto dphi = RadialDifferentiator(g.grid()).first(phi.values(), Parity::odd);
  const int n = g.size();
  std::vector<double> a(n), b(n);
  for (int i = 0; i < n; ++i) {
    a[i] = f(phi[i]) * dphi[i];
    b[i] = i == 0 ? 0.0 : p(phi[i]);
  }
  auto out = RotSymMetric::unchecked(g.grid(), std::move(a), std::move(b));
  if (auto d = out.degeneracy()) throw GaugeFailure(fmt::format("pullback degenerated at node {}: {}", d->node, d->what));
  return out;
}

/// Gauge maps at the times of a DeTurck history.
struct GaugeHistory {
  std::vector<double> times;
  std::vector<GaugeMap> maps;

  /// Map recorded at time t (matched to 1e-9 relative); throws if absent.
  const GaugeMap& at(double t) const {
    for (std::size_t k = 0; k < times.size(); ++k)
      if (std::abs(times[k] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return maps[k];
    throw PreconditionError(fmt::format("gauge history has no map at t = {}", t));
  }
};

/// Solves d/dt Phi_t(r) = -W(Phi_t(r), t), Phi_0 = start (identity when
/// omitted), node by node.
/// Classical RK4 between consecutive history samples; W at the half step
/// comes from cubic Lagrange interpolation over the four nearest samples, and
/// in r from monotone cubic interpolation. W is taken as 0 at both ends so the
/// origin and the pinned outer boundary stay fixed.
inline GaugeHistory integrate_gauge(const DeTurckHistory& w, const RadialGrid& grid,
                                    const std::optional<GaugeMap>& start = std::nullopt) {
  const std::size_t m = w.times.size();
  if (m == 0 || w.samples.size() != m) throw PreconditionError("integrate_gauge: empty or inconsistent history");
  for (std::size_t k = 1; k < m; ++k)
    if (!(w.times[k] > w.times[k - 1])) throw PreconditionError("integrate_gauge: history times must increase");
  const int n = grid.size();
  for (const auto& s : w.samples)
    if (static_cast<int>(s.size()) != n) throw PreconditionError("integrate_gauge: sample size does not match grid");

  auto field_at = [&](const std::vector<double>& s) {
    std::vector<double> v(s);
    v.front() = 0.0;
    v.back() = 0.0;
    return HermiteInterpolant(grid, std::move(v), Parity::odd);
  };
  auto midpoint_field = [&](std::size_t k) {
    const double t = 0.5 * (w.times[k] + w.times[k + 1]);
    const std::size_t lo = k == 0 ? 0 : k - 1;
    const std::size_t hi = std::min(m - 1, lo + 3);
    const std::size_t start = hi >= 3 ? std::min(lo, hi - 3) : 0;
    std::vector<double> v(n, 0.0);
    for (std::size_t a = start; a <= hi; ++a) {
      double l = 1.0;
      for (std::size_t b = start; b <= hi; ++b)
        if (b != a) l *= (t - w.times[b]) / (w.times[a] - w.times[b]);
      for (int i = 0; i < n; ++i) v[i] += l * w.samples[a][i];
    }
    return field_at(v);
  };

  GaugeHistory out;
  out.times = w.times;
  out.maps.reserve(m);
  if (start) require_same_grid(start->grid(), grid, "integrate_gauge");
  std::vector<double> phi = start ? start->values() : grid.nodes();
  out.maps.emplace_back(grid, phi);
  auto f0 = field_at(w.samples[0]);
  for (std::size_t k = 0; k + 1 < m; ++k) {
    const double dt = w.times[k + 1] - w.times[k];
    const auto fm = midpoint_field(k);
    auto f1 = field_at(w.samples[k + 1]);
    for (int i = 1; i < n - 1; ++i) {
      const double x = phi[i];
      const double k1 = -f0(x);
      const double k2 = -fm(x + 0.5 * dt * k1);
      const double k3 = -fm(x + 0.5 * dt * k2);
      const double k4 = -f1(x + dt * k3);
      phi[i] = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    GaugeMap map(grid, phi);
    if (const int bad = map.monotonicity_defect(); bad >= 0)
      throw GaugeFailure(fmt::format("gauge map lost monotonicity at node {} (t = {:.6g})", bad, w.times[k + 1]));
    out.maps.push_back(std::move(map));
    f0 = std::move(f1);
  }
  return out;
}

/// Pulls back every snapshot of a gauged run by the matching gauge map,
/// producing the corresponding ungauged trajectory. Snapshot times must be a
/// subset of the DeTurck history times.
inline FlowTrajectory ungauge(const FlowTrajectory& gauged, const GaugeHistory& gauge, const WeightedNormParams& norm) {
  FlowTrajectory out;
  out.status = gauged.status;
  out.failure = gauged.failure;
  for (std::size_t k = 0; k < gauged.times.size(); ++k) {
    auto g = pullback(gauged.snapshots[k], gauge.at(gauged.times[k]));
    auto d = diagnose(g, {}, norm);
    d.w_inf = gauged.diagnostics[k].w_inf;
    out.times.push_back(gauged.times[k]);
    out.snapshots.push_back(std::move(g));
    out.diagnostics.push_back(d);
  }
  return out;
}

/// Ungauged trajectory assembled from per-segment DeTurck runs.
struct ChainedFlow {
  FlowTrajectory trajectory;          ///< ungauged metric at every recorded time of every segment
  std::vector<GaugeMap> segment_maps; ///< gauge map Phi_i of each completed segment
  std::optional<GaugeMap> composed;   ///< Phi_1 o ... o Phi_N over the completed segments
};

/// On each [t_{i-1}, t_i] runs the Ricci-DeTurck flow started at, and
/// referenced to, the ungauged metric g(t_{i-1}), recovers the segment gauge
/// map Phi_i and emits g(t) = Phi_i^* (segment solution).
///
/// g(t_{i-1}) = X^* h with X = Phi_1 o ... o Phi_{i-1} and h the previous
/// segment's final DeTurck state. The DeTurck field is natural under
/// diffeomorphisms, so the segment solution from X^* h referenced to X^* h is
/// X^* of the run from h referenced to h, and X o Phi_i solves the same gauge
/// ODE as Phi_i, started from X. Segments are integrated in that form: the
/// flow only ever sees the smooth state h, and resampling happens once, when
/// a snapshot is pulled back for output.
///
/// cfg.reference and cfg.t_end are ignored; explicit segments shrink cfg.dt
/// to the stability bound of their starting metric when needed. When
/// cfg.gauge_every is 0 the gauge cadence defaults to cfg.record_every.
inline ChainedFlow chained_rdtf(const RotSymMetric& g0, const std::vector<double>& partition, const FlowConfig& cfg) {
  if (partition.size() < 2 || partition.front() != 0.0)
    throw PreconditionError("chained_rdtf: partition must start at 0 and contain at least two times");
  for (std::size_t i = 1; i < partition.size(); ++i)
    if (!(partition[i] > partition[i - 1])) throw PreconditionError("chained_rdtf: partition must be strictly increasing");
  FlowConfig seg = cfg;
  if (seg.gauge_every == 0) seg.gauge_every = seg.record_every;
  if (seg.record_every % seg.gauge_every != 0)
    throw PreconditionError("chained_rdtf: record_every must be a multiple of gauge_every");

  ChainedFlow out;
  RotSymMetric state = g0;
  std::optional<GaugeMap> accumulated;
  for (std::size_t i = 1; i < partition.size(); ++i) {
    const double t0 = partition[i - 1];
    seg.t_end = partition[i] - t0;
    seg.reference = state;
    if (seg.integrator == Integrator::rk4) seg.dt = std::min(cfg.dt, stable_dt(state, cfg.cfl_safety));
    const auto traj = run_flow(state, seg);
    if (traj.status != FlowStatus::completed) {
      out.trajectory.status = traj.status;
      out.trajectory.failure = traj.failure;
      return out;
    }
    try {
      const auto gauge = integrate_gauge(traj.w_history, state.grid(), accumulated);
      const auto part = ungauge(traj, gauge, cfg.norm);
      for (std::size_t k = (i == 1 ? 0 : 1); k < part.times.size(); ++k) {
        out.trajectory.times.push_back(t0 + part.times[k]);
        out.trajectory.snapshots.push_back(part.snapshots[k]);
        out.trajectory.diagnostics.push_back(part.diagnostics[k]);
      }
      const GaugeMap& total = gauge.maps.back();
      out.segment_maps.push_back(accumulated ? compose(inverse(*accumulated), total) : total);
      accumulated = total;
      out.composed = total;
    } catch (const GaugeFailure& e) {
      out.trajectory.status = FlowStatus::gauge_failure;
      out.trajectory.failure = Degeneracy{-1, false, e.what()};
      return out;
    }
    state = traj.final_metric();
  }
  return out;
}

}  // namespace ahflow

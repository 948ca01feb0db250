#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "ahflow/error.hpp"
#include "ahflow/grid.hpp"

namespace ahflow {

/// First node at which a metric violates positivity or finiteness.
struct Degeneracy {
  int node;
  bool non_finite;
  std::string what;
};

/// g = phi(r)^2 dr^2 + psi(r)^2 g_{S^{n-1}} sampled on a RadialGrid.
class RotSymMetric {
 public:
  /// Validating constructor: throws DegenerateMetricError on bad samples.
  RotSymMetric(RadialGrid grid, std::vector<double> phi, std::vector<double> psi)
      : grid_(grid), phi_(std::move(phi)), psi_(std::move(psi)) {
    check_sizes();
    if (auto d = degeneracy()) throw DegenerateMetricError(d->node, d->what);
  }

  /// Builds a metric without positivity checks; callers inspect degeneracy().
  static RotSymMetric unchecked(RadialGrid grid, std::vector<double> phi, std::vector<double> psi) {
    RotSymMetric g(grid);
    g.phi_ = std::move(phi);
    g.psi_ = std::move(psi);
    g.check_sizes();
    return g;
  }

  const RadialGrid& grid() const noexcept { return grid_; }
  int dim() const noexcept { return grid_.dim(); }
  int size() const noexcept { return grid_.size(); }
  const std::vector<double>& phi() const noexcept { return phi_; }
  const std::vector<double>& psi() const noexcept { return psi_; }

  std::optional<Degeneracy> degeneracy() const {
    for (int i = 0; i < size(); ++i) {
      if (!std::isfinite(phi_[i]) || !std::isfinite(psi_[i]))
        return Degeneracy{i, true, "non-finite sample"};
    }
    for (int i = 0; i < size(); ++i) {
      if (!(phi_[i] > 0)) return Degeneracy{i, false, "phi <= 0"};
      if (i == 0 && psi_[0] != 0.0) return Degeneracy{0, false, "psi(0) != 0"};
      if (i > 0 && !(psi_[i] > 0)) return Degeneracy{i, false, "psi <= 0 away from the origin"};
    }
    return std::nullopt;
  }

  /// One-sided psi'(0) from the odd extension, fourth order.
  double psi_slope_at_origin() const noexcept {
    return (8.0 * psi_[1] - psi_[2]) / (6.0 * grid_.spacing());
  }

  /// |psi'(0) - phi(0)| < tol, the condition for g to close up smoothly at r = 0.
  bool origin_smooth(double tol) const noexcept { return std::abs(psi_slope_at_origin() - phi_[0]) < tol; }

  friend bool operator==(const RotSymMetric& a, const RotSymMetric& b) {
    return a.grid_ == b.grid_ && a.phi_ == b.phi_ && a.psi_ == b.psi_;
  }

 private:
  explicit RotSymMetric(RadialGrid grid) : grid_(grid) {}
  void check_sizes() const {
    if (static_cast<int>(phi_.size()) != grid_.size() || static_cast<int>(psi_.size()) != grid_.size())
      throw PreconditionError("metric: sample count does not match grid");
  }

  RadialGrid grid_;
  std::vector<double> phi_;
  std::vector<double> psi_;
};

/// Diagonal symmetric 2-tensor h = h_rr dr^2 + h_sph g_{S^{n-1}}.
struct MetricPerturbation {
  RadialGrid grid;
  std::vector<double> h_rr;
  std::vector<double> h_sph;

  static MetricPerturbation zero(const RadialGrid& grid) {
    return {grid, std::vector<double>(grid.size(), 0.0), std::vector<double>(grid.size(), 0.0)};
  }

  MetricPerturbation& operator*=(double s) {
    for (auto& v : h_rr) v *= s;
    for (auto& v : h_sph) v *= s;
    return *this;
  }
  friend MetricPerturbation operator*(double s, MetricPerturbation p) { return p *= s; }
  friend MetricPerturbation operator+(MetricPerturbation a, const MetricPerturbation& b) {
    for (std::size_t i = 0; i < a.h_rr.size(); ++i) {
      a.h_rr[i] += b.h_rr[i];
      a.h_sph[i] += b.h_sph[i];
    }
    return a;
  }
};

inline void require_same_grid(const RadialGrid& a, const RadialGrid& b, const char* where) {
  if (!(a == b)) throw PreconditionError(std::string(where) + ": grids differ");
}

/// The metric perturbation g - base.
inline MetricPerturbation difference(const RotSymMetric& g, const RotSymMetric& base) {
  require_same_grid(g.grid(), base.grid(), "difference");
  MetricPerturbation d = MetricPerturbation::zero(g.grid());
  for (int i = 0; i < g.size(); ++i) {
    d.h_rr[i] = g.phi()[i] * g.phi()[i] - base.phi()[i] * base.phi()[i];
    d.h_sph[i] = g.psi()[i] * g.psi()[i] - base.psi()[i] * base.psi()[i];
  }
  return d;
}

/// g + h, componentwise in (g_rr, g_sph). Throws if a component turns non-positive.
inline RotSymMetric add(const RotSymMetric& g, const MetricPerturbation& h) {
  require_same_grid(g.grid(), h.grid, "add");
  std::vector<double> phi(g.size()), psi(g.size());
  for (int i = 0; i < g.size(); ++i) {
    const double grr = g.phi()[i] * g.phi()[i] + h.h_rr[i];
    const double gss = g.psi()[i] * g.psi()[i] + h.h_sph[i];
    if (!(grr > 0) || (i > 0 && !(gss > 0))) throw DegenerateMetricError(i, "perturbed metric not positive");
    phi[i] = std::sqrt(grr);
    psi[i] = i == 0 ? 0.0 : std::sqrt(gss);
  }
  return RotSymMetric(g.grid(), std::move(phi), std::move(psi));
}

/// g_h = dr^2 + sinh^2 r g_{S^{n-1}} in geodesic polar coordinates.
inline RotSymMetric hyperbolic_metric(const RadialGrid& grid) {
  std::vector<double> phi(grid.size(), 1.0), psi(grid.size());
  for (int i = 0; i < grid.size(); ++i) psi[i] = std::sinh(grid.r(i));
  return RotSymMetric(grid, std::move(phi), std::move(psi));
}

/// Flat metric dr^2 + r^2 g_{S^{n-1}}.
inline RotSymMetric flat_metric(const RadialGrid& grid) {
  std::vector<double> phi(grid.size(), 1.0), psi(grid.size());
  for (int i = 0; i < grid.size(); ++i) psi[i] = grid.r(i);
  return RotSymMetric(grid, std::move(phi), std::move(psi));
}

/// Metric from a warp profile w: phi = sqrt(1 + w^2), psi = sinh r, plus the
/// parity and decay properties of w that make g asymptotically hyperbolic.
struct ProfileMetric {
  RotSymMetric metric;
  bool even_at_origin;      ///< |w'(0)| < 10 h
  bool decays_at_rate_mu;   ///< log|w| slope over the outer quarter <= -mu
  double fitted_decay_rate; ///< -slope of log|w| on the outer quarter (inf if w vanishes there)
};

inline ProfileMetric from_profile(const RadialGrid& grid, const std::vector<double>& w, double mu) {
  if (static_cast<int>(w.size()) != grid.size()) throw PreconditionError("profile: sample count does not match grid");
  if (w[0] != 0.0) throw PreconditionError("profile: w(0) must vanish");
  std::vector<double> phi(grid.size()), psi(grid.size());
  for (int i = 0; i < grid.size(); ++i) {
    phi[i] = std::sqrt(1.0 + w[i] * w[i]);
    psi[i] = std::sinh(grid.r(i));
  }
  const double h = grid.spacing();
  const double dw0 = (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * h);

  // least-squares slope of log|w| over the outer quarter; vanishing samples count as decayed
  const int start = grid.size() - grid.size() / 4;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  bool all_zero = true;
  for (int i = start; i < grid.size(); ++i) {
    const double a = std::abs(w[i]);
    if (a == 0.0) continue;
    all_zero = false;
    const double x = grid.r(i), y = std::log(a);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  double rate = std::numeric_limits<double>::infinity();
  if (!all_zero && m >= 2) rate = -(m * sxy - sx * sy) / (m * sxx - sx * sx);
  return {RotSymMetric(grid, std::move(phi), std::move(psi)), std::abs(dw0) < 10.0 * h, rate >= mu, rate};
}

/// Samples of w on the grid.
inline std::vector<double> sample(const RadialGrid& grid, const std::function<double(double)>& w) {
  std::vector<double> out(grid.size());
  for (int i = 0; i < grid.size(); ++i) out[i] = w(grid.r(i));
  return out;
}

/// The profile family w_A(r) = A r^2 exp(-r^2) used throughout the experiments.
inline double gaussian_bump_profile(double amplitude, double r) { return amplitude * r * r * std::exp(-r * r); }

// --- snapshot files -------------------------------------------------------

/// "# n=<dim> r_max=<..> nodes=<..>" followed by one "r,phi,psi" record per node.
inline std::string format_snapshot(const RotSymMetric& g) {
  std::string out = fmt::format("# n={} r_max={:.17g} nodes={}\n", g.dim(), g.grid().r_max(), g.size());
  for (int i = 0; i < g.size(); ++i)
    out += fmt::format("{:.17g},{:.17g},{:.17g}\n", g.grid().r(i), g.phi()[i], g.psi()[i]);
  return out;
}

inline void write_snapshot(const std::string& path, const RotSymMetric& g) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open snapshot file for writing: " + path);
  os << format_snapshot(g);
}

inline RotSymMetric parse_snapshot(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw Error("snapshot: empty input");
  int n = 0, nodes = 0;
  double r_max = 0;
  if (std::sscanf(line.c_str(), "# n=%d r_max=%lf nodes=%d", &n, &r_max, &nodes) != 3)
    throw Error("snapshot: malformed header line: " + line);
  RadialGrid grid(n, r_max, nodes);
  std::vector<double> phi, psi;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    double r, a, b;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &r, &a, &b) != 3)
      throw Error(fmt::format("snapshot: malformed record on line {}", lineno));
    phi.push_back(a);
    psi.push_back(b);
  }
  if (static_cast<int>(phi.size()) != nodes) throw Error("snapshot: record count does not match header");
  return RotSymMetric::unchecked(grid, std::move(phi), std::move(psi));
}

inline RotSymMetric read_snapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open snapshot file: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_snapshot(ss.str());
}

}  // namespace ahflow

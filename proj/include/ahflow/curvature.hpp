#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ahflow/grid.hpp"
#include "ahflow/metric.hpp"

namespace ahflow {

/// phi_r, phi_rr (even extension) and psi_r, psi_rr (odd extension) at every node.
struct WarpDerivatives {
  std::vector<double> phi_r, phi_rr, psi_r, psi_rr;

  explicit WarpDerivatives(const RotSymMetric& g) {
    const RadialDifferentiator d(g.grid());
    phi_r = d.first(g.phi(), Parity::even);
    phi_rr = d.second(g.phi(), Parity::even);
    psi_r = d.first(g.psi(), Parity::odd);
    psi_rr = d.second(g.psi(), Parity::odd);
  }
};

namespace detail {
inline void fill_origin_even(std::vector<double>& v) { v[0] = even_origin_value(v[1], v[2]); }
}  // namespace detail

/// Sectional curvature of 2-planes tangent to the orbit spheres,
/// sec_T = 1/psi^2 - psi_r^2 / (phi^2 psi^2). Node 0 holds the even
/// extrapolation of the interior values.
inline std::vector<double> sectional_tangential(const RotSymMetric& g) {
  const WarpDerivatives d(g);
  std::vector<double> out(g.size());
  for (int i = 1; i < g.size(); ++i) {
    const double phi = g.phi()[i], psi = g.psi()[i];
    const double s = d.psi_r[i] / phi;
    out[i] = (1.0 - s) * (1.0 + s) / (psi * psi);
  }
  detail::fill_origin_even(out);
  return out;
}

/// Sectional curvature of radial 2-planes, -(1/(phi psi)) d/dr(psi_r/phi).
/// The quotient psi_r/phi is differentiated as a sampled function, which is a
/// different discrete route than the expanded formula inside ricci().
inline std::vector<double> sectional_radial(const RotSymMetric& g) {
  const RadialDifferentiator diff(g.grid());
  const auto psi_r = diff.first(g.psi(), Parity::odd);
  std::vector<double> q(g.size());
  for (int i = 0; i < g.size(); ++i) q[i] = psi_r[i] / g.phi()[i];
  const auto dq = diff.first(q, Parity::even);
  std::vector<double> out(g.size());
  for (int i = 1; i < g.size(); ++i) out[i] = -dq[i] / (g.phi()[i] * g.psi()[i]);
  detail::fill_origin_even(out);
  return out;
}

/// Coordinate Ricci components: Ric = Ric_rr dr^2 + Ric_sph g_{S^{n-1}}.
struct RicciComponents {
  std::vector<double> rr;
  std::vector<double> sph;
};

/// Warped-product Ricci tensor,
///   Ric_rr  = -(n-1) (psi_rr/psi - phi_r psi_r / (phi psi))
///   Ric_sph = -psi psi_rr/phi^2 + psi psi_r phi_r/phi^3 + (n-2)(1 - psi_r^2/phi^2).
/// Node 0 uses the smooth limits Ric_rr -> (n-1) phi^2 K, Ric_sph -> 0.
inline RicciComponents ricci(const RotSymMetric& g, const WarpDerivatives& d) {
  const int n = g.dim();
  RicciComponents out{std::vector<double>(g.size()), std::vector<double>(g.size())};
  for (int i = 1; i < g.size(); ++i) {
    const double phi = g.phi()[i], psi = g.psi()[i];
    const double s = d.psi_r[i] / phi;
    out.rr[i] = -(n - 1) * (d.psi_rr[i] / psi - d.phi_r[i] * d.psi_r[i] / (phi * psi));
    out.sph[i] = -psi * d.psi_rr[i] / (phi * phi) + psi * d.psi_r[i] * d.phi_r[i] / (phi * phi * phi) +
                 (n - 2) * (1.0 - s) * (1.0 + s);
  }
  // Ric_rr/phi^2 is even and smooth through the origin
  const double k1 = out.rr[1] / (g.phi()[1] * g.phi()[1]);
  const double k2 = out.rr[2] / (g.phi()[2] * g.phi()[2]);
  out.rr[0] = even_origin_value(k1, k2) * g.phi()[0] * g.phi()[0];
  out.sph[0] = 0.0;
  return out;
}

inline RicciComponents ricci(const RotSymMetric& g) { return ricci(g, WarpDerivatives(g)); }

/// max over interior nodes of the orthonormal-frame components of Ric + (n-1) g.
inline double einstein_residual(const RotSymMetric& g) {
  const auto ric = ricci(g);
  const int n = g.dim();
  double worst = 0.0;
  for (int i = 1; i < g.size() - 1; ++i) {
    const double a = ric.rr[i] / (g.phi()[i] * g.phi()[i]) + (n - 1);
    const double b = ric.sph[i] / (g.psi()[i] * g.psi()[i]) + (n - 1);
    worst = std::max({worst, std::abs(a), std::abs(b)});
  }
  return worst;
}

/// Minimum of sec_T over nodes with r > 0.
inline double min_sectional_tangential(const RotSymMetric& g) {
  const auto s = sectional_tangential(g);
  return *std::min_element(s.begin() + 1, s.end());
}

}  // namespace ahflow

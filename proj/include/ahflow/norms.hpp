#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ahflow/error.hpp"
#include "ahflow/grid.hpp"
#include "ahflow/metric.hpp"

namespace ahflow {

/// (mu, k) of the discrete C^k_mu surrogate norm; 0 < mu < n-1, k <= 2.
struct WeightedNormParams {
  double mu = 1.0;
  int k = 0;

  void validate(int n_dim) const {
    if (!(mu > 0.0 && mu < n_dim - 1))
      throw PreconditionError(fmt::format("mu = {} outside the admissible range (0, n-1) = (0, {})", mu, n_dim - 1));
    if (k < 0 || k > 2) throw PreconditionError("weighted norm: derivative order k must be 0, 1 or 2");
  }
};

/// Defining-function surrogate rho(r) = sech r = 2 e^{-r} / (1 + e^{-2r}).
class BoundaryWeight {
 public:
  explicit BoundaryWeight(const RadialGrid& grid) : rho_(grid.size()) {
    for (int i = 0; i < grid.size(); ++i) rho_[i] = 1.0 / std::cosh(grid.r(i));
  }
  const std::vector<double>& rho() const noexcept { return rho_; }
  double operator[](int i) const noexcept { return rho_[i]; }

 private:
  std::vector<double> rho_;
};

/// Orthonormal-frame components (h_rr/phi^2, h_sph/psi^2) of h relative to base.
/// The angular component at r = 0 is the even extrapolation of its neighbours.
struct FrameComponents {
  std::vector<double> radial;
  std::vector<double> angular;
};

inline FrameComponents frame_components(const RotSymMetric& base, const MetricPerturbation& h) {
  require_same_grid(base.grid(), h.grid, "frame_components");
  const int n = base.size();
  FrameComponents f{std::vector<double>(n), std::vector<double>(n)};
  for (int i = 0; i < n; ++i) {
    f.radial[i] = h.h_rr[i] / (base.phi()[i] * base.phi()[i]);
    if (i > 0) f.angular[i] = h.h_sph[i] / (base.psi()[i] * base.psi()[i]);
  }
  f.angular[0] = even_origin_value(f.angular[1], f.angular[2]);
  return f;
}

/// |h|_g = sqrt((h_rr/phi^2)^2 + (n-1)(h_sph/psi^2)^2) at each node.
inline std::vector<double> tensor_norm_pointwise(const RotSymMetric& base, const MetricPerturbation& h) {
  const auto f = frame_components(base, h);
  const int n = base.dim();
  std::vector<double> out(base.size());
  for (int i = 0; i < base.size(); ++i)
    out[i] = std::sqrt(f.radial[i] * f.radial[i] + (n - 1) * f.angular[i] * f.angular[i]);
  return out;
}

/// max over interior nodes and j <= k of rho^{-mu} |D^j h|, D^j the j-th
/// centered difference of the frame components. Boundary samples are treated
/// as zero (perturbations are pinned there), so the result depends only on
/// interior values.
inline double weighted_norm(const RotSymMetric& base, const MetricPerturbation& h, const WeightedNormParams& p,
                            const BoundaryWeight& w) {
  auto f = frame_components(base, h);
  const int n = base.size();
  const int dim = base.dim();
  const double dh = base.grid().spacing();
  f.radial[n - 1] = 0.0;
  f.angular[n - 1] = 0.0;
  f.radial[0] = even_origin_value(f.radial[1], f.radial[2]);
  f.angular[0] = even_origin_value(f.angular[1], f.angular[2]);
  auto diff = [&](const std::vector<double>& v, int i, int j) {
    switch (j) {
      case 0: return v[i];
      case 1: return (v[i + 1] - v[i - 1]) / (2.0 * dh);
      default: return (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (dh * dh);
    }
  };
  double worst = 0.0;
  for (int i = 1; i < n - 1; ++i) {
    const double weight = p.mu == 0.0 ? 1.0 : std::pow(w[i], -p.mu);
    for (int j = 0; j <= p.k; ++j) {
      const double a = diff(f.radial, i, j);
      const double b = diff(f.angular, i, j);
      worst = std::max(worst, weight * std::sqrt(a * a + (dim - 1) * b * b));
    }
  }
  return worst;
}

/// Weighted distance ||g - g_ref|| measured in the frame of `frame`.
inline double weighted_distance(const RotSymMetric& g, const RotSymMetric& g_ref, const RotSymMetric& frame,
                                const WeightedNormParams& p, const BoundaryWeight& w) {
  return weighted_norm(frame, difference(g, g_ref), p, w);
}

}  // namespace ahflow

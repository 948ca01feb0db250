#pragma once

#include <cmath>
#include <optional>

#include "ahflow/curvature.hpp"
#include "ahflow/metric.hpp"
#include "ahflow/norms.hpp"

namespace ahflow {

struct AdmissibilityReport {
  bool positive = false;
  std::optional<Degeneracy> degeneracy;
  bool origin_smooth = false;
  double origin_defect = 0.0;  ///< |psi'(0) - phi(0)|
  bool finite_distance = false;
  double distance_to_hyperbolic = 0.0;  ///< weighted C^k_mu norm of g - g_h
  double min_sec_t = 0.0;
  int argmin_sec_t = 0;
  bool negative_tangential_curvature = false;

  /// Hypotheses of the rotationally symmetric convergence theorem.
  bool admissible() const { return positive && origin_smooth && finite_distance && negative_tangential_curvature; }
};

inline AdmissibilityReport check_ah_admissible(const RotSymMetric& g, const WeightedNormParams& p) {
  AdmissibilityReport rep;
  rep.degeneracy = g.degeneracy();
  rep.positive = !rep.degeneracy.has_value();
  if (!rep.positive) return rep;

  const double h = g.grid().spacing();
  rep.origin_defect = std::abs(g.psi_slope_at_origin() - g.phi()[0]);
  rep.origin_smooth = rep.origin_defect < 10.0 * h * h;

  const auto gh = hyperbolic_metric(g.grid());
  rep.distance_to_hyperbolic = weighted_distance(g, gh, gh, p, BoundaryWeight(g.grid()));
  rep.finite_distance = std::isfinite(rep.distance_to_hyperbolic);

  const auto sec = sectional_tangential(g);
  rep.min_sec_t = sec[1];
  rep.argmin_sec_t = 1;
  for (int i = 2; i < g.size(); ++i) {
    if (sec[i] < rep.min_sec_t) {
      rep.min_sec_t = sec[i];
      rep.argmin_sec_t = i;
    }
  }
  rep.negative_tangential_curvature = rep.min_sec_t < 0.0;
  // "strictly negative" must hold at every node, not just at the minimum
  for (int i = 1; i < g.size(); ++i)
    if (!(sec[i] < 0.0)) rep.negative_tangential_curvature = false;
  return rep;
}

}  // namespace ahflow

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <lapacke.h>

#include "ahflow/error.hpp"
#include "ahflow/flow.hpp"
#include "ahflow/grid.hpp"
#include "ahflow/metric.hpp"
#include "ahflow/norms.hpp"

namespace ahflow {

/// Dense linearization acting on interior-node frame components
/// x = (h_rr/phi^2 at nodes 1..N-2, h_sph/psi^2 at nodes 1..N-2).
///
/// `matrix` is the operator L reported to callers. When `negated` is set,
/// L = -J where J is the Jacobian of the (normalized) Ricci-DeTurck speed, so
/// that L is the positive operator whose spectrum the Koiso-Bochner argument
/// bounds from below.
struct LinearOperatorMatrix {
  RadialGrid grid;
  Eigen::MatrixXd matrix;
  bool negated = false;
  std::string convention;

  int interior() const noexcept { return grid.size() - 2; }
  int dofs() const noexcept { return static_cast<int>(matrix.rows()); }
};

namespace detail {

/// g with g_rr and g_sph multiplied by (1 + eps a) and (1 + eps b) on interior nodes.
inline void perturb_frame(const RotSymMetric& base, const Eigen::VectorXd& x, double eps, std::vector<double>& phi,
                          std::vector<double>& psi) {
  const int m = base.size() - 2;
  phi = base.phi();
  psi = base.psi();
  for (int i = 1; i <= m; ++i) {
    phi[i] *= std::sqrt(1.0 + eps * x[i - 1]);
    psi[i] *= std::sqrt(1.0 + eps * x[m + i - 1]);
  }
}

/// Frame components of the flow speed at interior nodes, after the flow's own
/// boundary rules have been applied to (phi, psi).
inline Eigen::VectorXd frame_speed(const FlowOperator& op, const RotSymMetric& base, std::vector<double> phi,
                                   std::vector<double> psi) {
  impose_boundary(base.grid(), phi, psi);
  const auto s = op.evaluate(phi, psi);
  const int m = base.size() - 2;
  Eigen::VectorXd out(2 * m);
  for (int i = 1; i <= m; ++i) {
    out[i - 1] = s.h_rr[i] / (base.phi()[i] * base.phi()[i]);
    out[m + i - 1] = s.h_sph[i] / (base.psi()[i] * base.psi()[i]);
  }
  return out;
}

/// Riemannian volume weights phi psi^{n-1} h, with multiplicity n-1 on the angular block.
inline Eigen::VectorXd volume_weights(const RotSymMetric& g) {
  const int m = g.size() - 2;
  const double h = g.grid().spacing();
  Eigen::VectorXd w(2 * m);
  for (int i = 1; i <= m; ++i) {
    const double v = g.phi()[i] * std::pow(g.psi()[i], g.dim() - 1) * h;
    w[i - 1] = v;
    w[m + i - 1] = (g.dim() - 1) * v;
  }
  return w;
}

}  // namespace detail

/// Frame-component perturbation of `base` applied in the direction x.
inline RotSymMetric perturbed_metric(const RotSymMetric& base, const Eigen::VectorXd& x, double eps) {
  std::vector<double> phi, psi;
  detail::perturb_frame(base, x, eps, phi, psi);
  return RotSymMetric(base.grid(), std::move(phi), std::move(psi));
}

/// Frame components of the normalized Ricci-DeTurck speed at interior nodes.
inline Eigen::VectorXd frame_rdtf_speed(const RotSymMetric& g, const RotSymMetric& ref, const RotSymMetric& frame) {
  const detail::FlowOperator op(g.grid(), &ref, true);
  return detail::frame_speed(op, frame, g.phi(), g.psi());
}

struct LinearizationOptions {
  bool normalized = true;
  double eps = 1e-6;
};

/// Central-difference Jacobian of the Ricci-DeTurck speed at `base`, columns
/// indexed by frame components. The sign is fixed afterwards: the
/// volume-weighted quadratic form of a smooth radial probe must be positive,
/// otherwise the matrix is negated.
inline LinearOperatorMatrix assemble_linearized(const RotSymMetric& base, const RotSymMetric& ref,
                                                const LinearizationOptions& opt = {}) {
  require_same_grid(base.grid(), ref.grid(), "assemble_linearized");
  if (auto d = base.degeneracy()) throw DegenerateMetricError(d->node, "linearization base: " + d->what);
  const detail::FlowOperator op(base.grid(), &ref, opt.normalized);
  const int m = base.size() - 2;
  Eigen::MatrixXd J(2 * m, 2 * m);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(2 * m);
  std::vector<double> phi, psi;
  for (int j = 0; j < 2 * m; ++j) {
    e[j] = 1.0;
    detail::perturb_frame(base, e, opt.eps, phi, psi);
    const auto plus = detail::frame_speed(op, base, phi, psi);
    detail::perturb_frame(base, e, -opt.eps, phi, psi);
    const auto minus = detail::frame_speed(op, base, phi, psi);
    J.col(j) = (plus - minus) / (2.0 * opt.eps);
    e[j] = 0.0;
  }
  if (!J.allFinite()) throw Error("assemble_linearized: non-finite Jacobian entries");

  Eigen::VectorXd probe(2 * m);
  for (int i = 1; i <= m; ++i) {
    const double r = base.grid().r(i);
    probe[i - 1] = probe[m + i - 1] = std::exp(-r * r / 4.0);
  }
  const auto w = detail::volume_weights(base);
  const double form = probe.dot(w.cwiseProduct(J * probe));

  LinearOperatorMatrix out{base.grid(), {}, form < 0.0, {}};
  out.matrix = out.negated ? Eigen::MatrixXd(-J) : J;
  out.convention = out.negated ? "L = -d(speed)/dg (frame components)" : "L = +d(speed)/dg (frame components)";
  return out;
}

// --- spectrum -------------------------------------------------------------------

struct SpectrumReport {
  std::vector<std::complex<double>> eigenvalues;  ///< sorted by real part
  double min_real = 0.0;
};

/// All eigenvalues of a dense real matrix (LAPACK dgeev, no eigenvectors).
inline SpectrumReport spectrum(const Eigen::MatrixXd& L) {
  const lapack_int n = static_cast<lapack_int>(L.rows());
  if (n == 0 || L.cols() != L.rows()) throw PreconditionError("spectrum: need a non-empty square matrix");
  Eigen::MatrixXd A = L;  // dgeev overwrites its input
  std::vector<double> wr(n), wi(n);
  const lapack_int info = LAPACKE_dgeev(LAPACK_COL_MAJOR, 'N', 'N', n, A.data(), n, wr.data(), wi.data(), nullptr, 1,
                                        nullptr, 1);
  if (info != 0) throw Error(fmt::format("eigenvalue solver failed (dgeev info = {})", info));
  SpectrumReport rep;
  rep.eigenvalues.reserve(n);
  for (lapack_int i = 0; i < n; ++i) rep.eigenvalues.emplace_back(wr[i], wi[i]);
  std::sort(rep.eigenvalues.begin(), rep.eigenvalues.end(),
            [](auto a, auto b) { return a.real() < b.real() || (a.real() == b.real() && a.imag() < b.imag()); });
  rep.min_real = rep.eigenvalues.front().real();
  return rep;
}

inline SpectrumReport spectrum(const LinearOperatorMatrix& L) { return spectrum(L.matrix); }

/// Lowest real part of the hyperbolic linearization at spacing h and h/2.
struct SpectralBound {
  int n_dim = 0;
  double h = 0, r_max = 0;
  double min_real = 0;          ///< at spacing h
  double min_real_refined = 0;  ///< at spacing h/2
  double error_bar() const { return std::abs(min_real - min_real_refined); }
  double relative_change() const { return error_bar() / std::abs(min_real_refined); }
};

inline SpectralBound hyperbolic_spectral_bound(int n_dim, double h, double r_max) {
  SpectralBound b{n_dim, h, r_max, 0, 0};
  for (int level = 0; level < 2; ++level) {
    const auto grid = RadialGrid::with_spacing(n_dim, r_max, level == 0 ? h : h / 2);
    const auto gh = hyperbolic_metric(grid);
    const double v = spectrum(assemble_linearized(gh, gh)).min_real;
    (level == 0 ? b.min_real : b.min_real_refined) = v;
  }
  return b;
}

// --- scalar model ---------------------------------------------------------------

/// -(u'' + (n-1) coth(r) u') on all nodes of u (even extension at r = 0,
/// where the operator is -n u''(0)). The last entry is not meaningful when u
/// is truncated there.
inline std::vector<double> apply_scalar_laplacian(const RadialGrid& grid, const std::vector<double>& u) {
  const RadialDifferentiator d(grid);
  const auto u1 = d.first(u, Parity::even);
  const auto u2 = d.second(u, Parity::even);
  const int n = grid.dim();
  std::vector<double> out(u.size());
  out[0] = -n * u2[0];
  for (int i = 1; i < grid.size(); ++i) out[i] = -(u2[i] + (n - 1) * u1[i] / std::tanh(grid.r(i)));
  return out;
}

/// Scalar hyperbolic Laplacian on nodes 0..N-2 with u(r_max) = 0.
inline Eigen::MatrixXd scalar_model_matrix(const RadialGrid& grid) {
  const int m = grid.size() - 1;
  Eigen::MatrixXd A(m, m);
  std::vector<double> e(grid.size(), 0.0);
  for (int j = 0; j < m; ++j) {
    e[j] = 1.0;
    const auto col = apply_scalar_laplacian(grid, e);
    for (int i = 0; i < m; ++i) A(i, j) = col[i];
    e[j] = 0.0;
  }
  return A;
}

// --- resolvent --------------------------------------------------------------------

namespace detail {
inline Eigen::PartialPivLU<Eigen::MatrixXcd> resolvent_lu(const Eigen::MatrixXd& L, std::complex<double> lambda) {
  const Eigen::Index m = L.rows();
  Eigen::MatrixXcd A = -L.cast<std::complex<double>>();
  A.diagonal().array() += lambda;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
  const double rc = lu.rcond();
  if (!(rc > 1e3 * std::numeric_limits<double>::epsilon()) || m == 0)
    throw SingularResolventError(fmt::format("lambda I - L is numerically singular at lambda = {}{:+}i (rcond {:.3g})",
                                             lambda.real(), lambda.imag(), rc));
  return lu;
}

/// rho^{-mu} per frame row (both blocks share the node weight).
inline Eigen::VectorXd frame_weight(const LinearOperatorMatrix& L, double mu) {
  const int m = L.interior();
  const BoundaryWeight w(L.grid);
  Eigen::VectorXd d(2 * m);
  for (int i = 1; i <= m; ++i) d[i - 1] = d[m + i - 1] = mu == 0.0 ? 1.0 : std::pow(w[i], -mu);
  return d;
}
}  // namespace detail

/// Induced weighted sup-norm of (lambda I - L)^{-1}: the max-row-sum norm of
/// D (lambda I - L)^{-1} D^{-1} with D = diag(rho^{-mu}).
inline double resolvent_norm(const LinearOperatorMatrix& L, std::complex<double> lambda, const WeightedNormParams& p) {
  const auto lu = detail::resolvent_lu(L.matrix, lambda);
  const Eigen::MatrixXcd R = lu.inverse();
  const auto d = detail::frame_weight(L, p.mu);
  double best = 0.0;
  for (Eigen::Index i = 0; i < R.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < R.cols(); ++j) row += std::abs(R(i, j)) * d[i] / d[j];
    best = std::max(best, row);
  }
  return best;
}

/// Operator norm of (lambda I - L)^{-1} in the discrete L^2(dvol) inner product.
inline double resolvent_norm_l2(const LinearOperatorMatrix& L, const RotSymMetric& base, std::complex<double> lambda) {
  const auto lu = detail::resolvent_lu(L.matrix, lambda);
  const Eigen::VectorXd s = detail::volume_weights(base).cwiseSqrt();
  Eigen::MatrixXcd R = lu.inverse();
  R = s.asDiagonal() * R * s.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(R);
  return svd.singularValues()[0];
}

// --- sector certification -----------------------------------------------------

struct SectorSample {
  std::complex<double> lambda;
  double res_norm = std::numeric_limits<double>::infinity();
  double bound = std::numeric_limits<double>::infinity();  ///< C / |lambda - omega|
  bool pass = false;
};

struct SectorReport {
  double omega = 0, theta = 0;
  double C = 0;  ///< max over samples of res_norm |lambda - omega|
  std::vector<SectorSample> samples;
  std::vector<std::complex<double>> eigenvalues_in_sector;
  int singular_samples = 0;

  bool pass() const { return std::isfinite(C) && singular_samples == 0 && eigenvalues_in_sector.empty(); }
};

struct SectorOptions {
  int rays = 32;
  int magnitudes = 64;
  double min_radius = 1e-2;
  double max_radius = 1e4;
  WeightedNormParams norm{1.0, 0};
};

/// True when lambda lies in {lambda != omega : |arg(omega - lambda)| < theta}.
inline bool in_sector(std::complex<double> lambda, double omega, double theta) {
  const std::complex<double> z = omega - lambda;
  return std::abs(z) > 0.0 && std::abs(std::arg(z)) < theta;
}

/// Samples lambda = omega - s e^{i alpha} on `rays` directions strictly inside
/// |alpha| < theta and `magnitudes` log-spaced radii s, and certifies
/// C = max res_norm |lambda - omega|. Fails when a sample is singular or an
/// eigenvalue of L lies inside the sector.
inline SectorReport sector_check(const LinearOperatorMatrix& L, double omega, double theta, const SectorOptions& opt = {}) {
  if (!(theta > 0 && theta < std::numbers::pi / 2)) throw PreconditionError("sector_check: theta must lie in (0, pi/2)");
  if (opt.rays < 1 || opt.magnitudes < 2) throw PreconditionError("sector_check: need >= 1 ray and >= 2 magnitudes");
  SectorReport rep{omega, theta, 0.0, {}, {}, 0};
  for (const auto& ev : spectrum(L).eigenvalues)
    if (in_sector(ev, omega, theta)) rep.eigenvalues_in_sector.push_back(ev);

  const double ls0 = std::log(opt.min_radius), ls1 = std::log(opt.max_radius);
  for (int k = 0; k < opt.rays; ++k) {
    const double alpha = -theta + (k + 0.5) * (2.0 * theta / opt.rays);
    for (int j = 0; j < opt.magnitudes; ++j) {
      const double s = std::exp(ls0 + (ls1 - ls0) * j / (opt.magnitudes - 1));
      SectorSample smp;
      smp.lambda = omega - s * std::polar(1.0, alpha);
      try {
        smp.res_norm = resolvent_norm(L, smp.lambda, opt.norm);
        smp.pass = std::isfinite(smp.res_norm);
        rep.C = std::max(rep.C, smp.res_norm * s);
      } catch (const SingularResolventError&) {
        ++rep.singular_samples;
        rep.C = std::numeric_limits<double>::infinity();
      }
      rep.samples.push_back(smp);
    }
  }
  for (auto& smp : rep.samples) smp.bound = rep.C / std::abs(smp.lambda - omega);
  return rep;
}

// --- indicial roots --------------------------------------------------------------

struct IndicialPair {
  std::complex<double> lambda;
  std::complex<double> gamma_minus, gamma_plus;
  bool beyond_threshold = false;  ///< Re lambda > (n-1)^2/4: the roots are complex
};

/// Roots of gamma^2 - (n-1) gamma + lambda = 0, the leading-order balance of
/// -(u'' + (n-1) coth(r) u') = lambda u on u = e^{-gamma r}.
inline IndicialPair indicial_roots_scalar(int n_dim, std::complex<double> lambda) {
  if (n_dim < 3) throw PreconditionError("indicial_roots_scalar: n must be >= 3");
  const double mid = 0.5 * (n_dim - 1);
  const std::complex<double> disc = std::sqrt(mid * mid - lambda);
  IndicialPair p{lambda, mid - disc, mid + disc, false};
  p.beyond_threshold = lambda.imag() == 0.0 && lambda.real() > mid * mid;
  return p;
}

/// Operator on k-component nodal data (component-major), for indicial probing.
struct IndicialOperator {
  RadialGrid grid;
  int components = 1;
  int first_node = 0;  ///< node index of the first row of every component
  int nodes = 0;       ///< rows per component
  std::function<std::vector<double>(const std::vector<double>&)> apply;
};

inline IndicialOperator scalar_indicial_operator(const RadialGrid& grid) {
  return {grid, 1, 0, grid.size(), [grid](const std::vector<double>& u) { return apply_scalar_laplacian(grid, u); }};
}

inline IndicialOperator matrix_indicial_operator(const LinearOperatorMatrix& L) {
  const int m = L.interior();
  return {L.grid, 2, 1, m, [&L](const std::vector<double>& x) {
            const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
            const Eigen::VectorXd y = L.matrix * v;
            return std::vector<double>(y.data(), y.data() + y.size());
          }};
}

struct IndicialScanOptions {
  double gamma_min = 0.05;
  double gamma_max = 6.0;
  double gamma_step = 0.05;
  int trailing_nodes = 4;  ///< nodes next to r_max left out of the fit
};

struct EmpiricalIndicial {
  std::vector<double> roots;  ///< detected roots, increasing; roots closer than gamma_step/100 are merged
  std::vector<double> gamma_grid;
  std::vector<std::vector<double>> branches;  ///< sorted eigenvalues of M(gamma) per grid point
  /// Smallest detected root above (n-1)/2, if any.
  std::optional<double> decaying_root(int n_dim) const {
    for (double g : roots)
      if (g > 0.5 * (n_dim - 1)) return g;
    return std::nullopt;
  }
};

namespace detail {

/// Least-squares fit of y = A + B rho^2 + C rho^4, returning A.
inline double leading_coefficient(const std::vector<double>& rho, const std::vector<double>& y) {
  const Eigen::Index m = static_cast<Eigen::Index>(y.size());
  if (m < 4) throw FitError("indicial fit: fewer than four points in the fit window");
  Eigen::MatrixXd X(m, 3);
  Eigen::VectorXd Y(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double r2 = rho[i] * rho[i];
    X(i, 0) = 1.0;
    X(i, 1) = r2;
    X(i, 2) = r2 * r2;
    Y[i] = y[i];
  }
  if (!Y.allFinite()) throw FitError("indicial fit: non-finite operator output");
  return X.colPivHouseholderQr().solve(Y)[0];
}

/// M(gamma): M_lk is the leading coefficient of component l of
/// (L - lambda)(rho^gamma e_k) / rho^gamma over the outer half of the grid.
inline Eigen::MatrixXd indicial_matrix(const IndicialOperator& op, double lambda, double gamma, int trailing) {
  const BoundaryWeight w(op.grid);
  const int k = op.components;
  const int lo = op.first_node + op.nodes / 2;
  const int hi = op.first_node + op.nodes - trailing;
  std::vector<double> rho;
  for (int i = lo; i < hi; ++i) rho.push_back(w[i]);
  Eigen::MatrixXd M(k, k);
  std::vector<double> trial(static_cast<std::size_t>(k) * op.nodes, 0.0);
  for (int c = 0; c < k; ++c) {
    std::fill(trial.begin(), trial.end(), 0.0);
    for (int i = 0; i < op.nodes; ++i) trial[c * op.nodes + i] = std::pow(w[op.first_node + i], gamma);
    const auto out = op.apply(trial);
    for (int l = 0; l < k; ++l) {
      std::vector<double> ratio;
      for (int i = lo; i < hi; ++i) {
        const int row = l * op.nodes + (i - op.first_node);
        ratio.push_back((out[row] - lambda * trial[row]) / std::pow(w[i], gamma));
      }
      M(l, c) = leading_coefficient(rho, ratio);
    }
  }
  return M;
}

/// Real parts of the eigenvalues of M(gamma), increasing. Roots of
/// det M show up as sign changes of individual branches even when they are
/// repeated (as for decoupled components sharing one indicial polynomial).
inline std::vector<double> indicial_branches(const IndicialOperator& op, double lambda, double gamma, int trailing) {
  const auto M = indicial_matrix(op, lambda, gamma, trailing);
  std::vector<double> out;
  if (M.rows() == 1) {
    out.push_back(M(0, 0));
  } else {
    const Eigen::VectorXcd ev = M.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) out.push_back(ev[i].real());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

/// Scans gamma, locates sign changes of each branch of the leading indicial
/// matrix and refines them by bisection. Requires r_max >= 12.
inline EmpiricalIndicial empirical_indicial(const IndicialOperator& op, double lambda,
                                            const IndicialScanOptions& opt = {}) {
  if (op.grid.r_max() < 12.0) throw PreconditionError("empirical_indicial: needs r_max >= 12");
  if (!(opt.gamma_step > 0 && opt.gamma_max > opt.gamma_min))
    throw PreconditionError("empirical_indicial: empty gamma grid");
  EmpiricalIndicial out;
  auto branch = [&](double g, std::size_t j) {
    return detail::indicial_branches(op, lambda, g, opt.trailing_nodes)[j];
  };
  const int count = static_cast<int>(std::floor((opt.gamma_max - opt.gamma_min) / opt.gamma_step + 1e-9)) + 1;
  for (int j = 0; j < count; ++j) {
    const double g = opt.gamma_min + j * opt.gamma_step;
    out.gamma_grid.push_back(g);
    out.branches.push_back(detail::indicial_branches(op, lambda, g, opt.trailing_nodes));
  }
  std::vector<double> found;
  for (std::size_t b = 0; b < static_cast<std::size_t>(op.components); ++b) {
    for (int j = 0; j + 1 < count; ++j) {
      double lo = out.gamma_grid[j], hi = out.gamma_grid[j + 1];
      double flo = out.branches[j][b];
      const double fhi = out.branches[j + 1][b];
      if (flo == 0.0) {
        found.push_back(lo);
        continue;
      }
      if (fhi == 0.0) {
        if (j + 2 == count) found.push_back(hi);
        continue;
      }
      if ((flo < 0.0) == (fhi < 0.0)) continue;
      for (int it = 0; it < 60 && hi - lo > 1e-12; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = branch(mid, b);
        if ((fm < 0.0) == (flo < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      found.push_back(0.5 * (lo + hi));
    }
  }
  std::sort(found.begin(), found.end());
  for (double g : found)
    if (out.roots.empty() || g - out.roots.back() > 1e-2 * opt.gamma_step) out.roots.push_back(g);
  return out;
}

}  // namespace ahflow

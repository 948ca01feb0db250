#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "ahflow/error.hpp"

namespace ahflow {

/// Uniform radial grid r_i = i*h on [0, r_max] for a rotationally symmetric
/// metric on the n-ball.
class RadialGrid {
 public:
  RadialGrid(int n_dim, double r_max, int n_nodes) : n_dim_(n_dim), r_max_(r_max), n_nodes_(n_nodes) {
    if (n_dim < 3) throw PreconditionError("grid: dimension n must be >= 3");
    if (n_nodes < 16) throw PreconditionError("grid: need at least 16 nodes");
    if (!(r_max >= 5.0)) throw PreconditionError("grid: r_max must be >= 5");
    h_ = r_max / (n_nodes - 1);
  }

  /// Grid with spacing as close to `h` as the node count allows.
  static RadialGrid with_spacing(int n_dim, double r_max, double h) {
    if (!(h > 0)) throw PreconditionError("grid: spacing must be positive");
    const int n = static_cast<int>(std::lround(r_max / h)) + 1;
    return RadialGrid(n_dim, r_max, n);
  }

  int dim() const noexcept { return n_dim_; }
  double r_max() const noexcept { return r_max_; }
  int size() const noexcept { return n_nodes_; }
  double spacing() const noexcept { return h_; }
  double r(int i) const noexcept { return i == n_nodes_ - 1 ? r_max_ : i * h_; }

  std::vector<double> nodes() const {
    std::vector<double> out(n_nodes_);
    for (int i = 0; i < n_nodes_; ++i) out[i] = r(i);
    return out;
  }

  friend bool operator==(const RadialGrid& a, const RadialGrid& b) {
    return a.n_dim_ == b.n_dim_ && a.n_nodes_ == b.n_nodes_ && a.r_max_ == b.r_max_;
  }

 private:
  int n_dim_;
  double r_max_;
  int n_nodes_;
  double h_;
};

/// Behaviour of a sampled radial function under r -> -r, used to fill ghost
/// values at the origin.
enum class Parity { even, odd, none };

/// Finite-difference weights for the m-th derivative at z from nodes x
/// (Fornberg's recursion).
inline std::vector<double> fd_weights(double z, std::span<const double> x, int m) {
  const int n = static_cast<int>(x.size());
  std::vector<double> c(static_cast<std::size_t>(n) * (m + 1), 0.0);
  auto C = [&](int i, int k) -> double& { return c[static_cast<std::size_t>(i) * (m + 1) + k]; };
  double c1 = 1.0;
  double c4 = x[0] - z;
  C(0, 0) = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) C(i, k) = c1 * (k * C(i - 1, k - 1) - c5 * C(i - 1, k)) / c2;
        C(i, 0) = -c1 * c5 * C(i - 1, 0) / c2;
      }
      for (int k = mn; k >= 1; --k) C(j, k) = (c4 * C(j, k) - k * C(j, k - 1)) / c3;
      C(j, 0) = c4 * C(j, 0) / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = C(i, m);
  return w;
}

/// Fourth-order five-point derivatives on a RadialGrid. Centered stencils are
/// used wherever ghost values exist (parity extension at r = 0), skewed
/// one-sided stencils at the outer end.
class RadialDifferentiator {
 public:
  struct Stencil {
    int first_offset;
    std::array<double, 5> w;
  };

  explicit RadialDifferentiator(const RadialGrid& grid) : n_(grid.size()), h_(grid.spacing()) {
    for (int shift = 0; shift < 5; ++shift) {
      std::array<double, 5> x{};
      for (int k = 0; k < 5; ++k) x[k] = static_cast<double>(k - shift);
      for (int m = 1; m <= 2; ++m) {
        auto w = fd_weights(0.0, x, m);
        std::copy(w.begin(), w.end(), table_[m - 1][shift].begin());
      }
    }
  }

  int size() const noexcept { return n_; }
  double spacing() const noexcept { return h_; }

  /// Stencil (in units of h^-m) for derivative `order` at node i.
  Stencil stencil(int i, int order, Parity parity) const {
    int shift = 2;  // centered: offsets -2..2
    if (parity == Parity::none && i < 2) shift = i;
    if (i > n_ - 3) shift = 4 - (n_ - 1 - i);
    return {-shift, table_[order - 1][shift]};
  }

  /// Sample of f at index j, honoring parity for j < 0.
  static double at(std::span<const double> f, int j, Parity parity) noexcept {
    if (j >= 0) return f[j];
    return parity == Parity::odd ? -f[-j] : f[-j];
  }

  double apply(std::span<const double> f, int i, int order, Parity parity) const noexcept {
    const Stencil s = stencil(i, order, parity);
    double acc = 0.0;
    for (int k = 0; k < 5; ++k) acc += s.w[k] * at(f, i + s.first_offset + k, parity);
    return order == 1 ? acc / h_ : acc / (h_ * h_);
  }

  std::vector<double> first(std::span<const double> f, Parity parity) const { return sweep(f, 1, parity); }

  /// First derivative biased toward smaller r (offsets -3..+1), for terms
  /// transported outward. The last node falls back to the one-sided stencil.
  std::vector<double> upwind_first(std::span<const double> f, Parity parity) const {
    std::vector<double> out(n_);
    for (int i = 0; i < n_; ++i) {
      const int shift = i == n_ - 1 ? 4 : 3;
      double acc = 0.0;
      for (int k = 0; k < 5; ++k) acc += table_[0][shift][k] * at(f, i - shift + k, parity);
      out[i] = acc / h_;
    }
    return out;
  }

  std::vector<double> second(std::span<const double> f, Parity parity) const { return sweep(f, 2, parity); }

 private:
  std::vector<double> sweep(std::span<const double> f, int order, Parity parity) const {
    std::vector<double> out(n_);
    const auto& w = table_[order - 1][2];
    const double scale = order == 1 ? 1.0 / h_ : 1.0 / (h_ * h_);
    const int head = std::min(2, n_);
    for (int i = 0; i < head; ++i) out[i] = apply(f, i, order, parity);
    for (int i = 2; i < n_ - 2; ++i)
      out[i] = (w[0] * f[i - 2] + w[1] * f[i - 1] + w[2] * f[i] + w[3] * f[i + 1] + w[4] * f[i + 2]) * scale;
    for (int i = std::max(head, n_ - 2); i < n_; ++i) out[i] = apply(f, i, order, parity);
    return out;
  }

  int n_;
  double h_;
  std::array<std::array<std::array<double, 5>, 5>, 2> table_{};
};

/// Value at r = 0 of an even function from its samples at r_1, r_2
/// (fits c0 + c2 r^2).
inline double even_origin_value(double f1, double f2) noexcept { return (4.0 * f1 - f2) / 3.0; }

/// Cubic Hermite interpolation of grid data with fourth-order nodal slopes.
/// Arguments outside [0, r_max] are clamped; small negative arguments use the
/// parity extension.
class HermiteInterpolant {
 public:
  HermiteInterpolant(const RadialGrid& grid, std::vector<double> values, Parity parity)
      : h_(grid.spacing()), r_max_(grid.r_max()), parity_(parity), f_(std::move(values)) {
    df_ = RadialDifferentiator(grid).first(f_, parity);
  }

  double operator()(double x) const noexcept {
    double sign = 1.0;
    if (x < 0) {
      x = -x;
      if (parity_ == Parity::odd) sign = -1.0;
    }
    x = std::min(x, r_max_);
    const int n = static_cast<int>(f_.size());
    int i = std::min(static_cast<int>(x / h_), n - 2);
    const double t = (x - i * h_) / h_;
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1;
    const double h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2;
    const double h11 = t3 - t2;
    return sign * (h00 * f_[i] + h10 * h_ * df_[i] + h01 * f_[i + 1] + h11 * h_ * df_[i + 1]);
  }

 private:
  double h_;
  double r_max_;
  Parity parity_;
  std::vector<double> f_;
  std::vector<double> df_;
};

/// Monotone piecewise-cubic interpolant (Fritsch-Carlson slopes) through
/// (x_i, y_i) with strictly increasing x. Preserves monotonicity of the data.
class MonotoneCubic {
 public:
  MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n) throw PreconditionError("monotone cubic: need >= 2 matching samples");
    std::vector<double> delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double dx = x_[i + 1] - x_[i];
      if (!(dx > 0)) throw PreconditionError("monotone cubic: abscissae must be strictly increasing");
      delta[i] = (y_[i + 1] - y_[i]) / dx;
    }
    m_.assign(n, 0.0);
    m_[0] = delta[0];
    m_[n - 1] = delta[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (delta[i - 1] * delta[i] <= 0) {
        m_[i] = 0.0;
      } else {
        // weighted harmonic mean (Fritsch-Butland form)
        const double h0 = x_[i] - x_[i - 1];
        const double h1 = x_[i + 1] - x_[i];
        const double w1 = 2 * h1 + h0;
        const double w2 = h1 + 2 * h0;
        m_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
      }
    }
  }

  double operator()(double x) const noexcept {
    const std::size_t n = x_.size();
    if (x <= x_.front()) return y_.front() + m_.front() * (x - x_.front());
    if (x >= x_.back()) return y_.back() + m_.back() * (x - x_.back());
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(it - x_.begin()) - 1, n - 2);
    const double h = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / h;
    const double t2 = t * t;
    const double t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y_[i] + (t3 - 2 * t2 + t) * h * m_[i] + (-2 * t3 + 3 * t2) * y_[i + 1] +
           (t3 - t2) * h * m_[i + 1];
  }

 private:
  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<double> m_;
};

}  // namespace ahflow

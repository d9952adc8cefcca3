#ifndef BROWNFLOW_MOLLIFIER_HPP
#define BROWNFLOW_MOLLIFIER_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "brownflow/quadrature.hpp"

namespace brownflow {

namespace detail {

/// Unnormalized C-infinity bump profile on [0,1): exp(-1/(1-s^2)), zero for s >= 1.
inline double bump_profile(double s) {
  const double s2 = s * s;
  if (s2 >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - s2));
}

/// Surface area of the unit sphere in R^d.
inline double unit_sphere_area(int d) {
  return 2.0 * std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d);
}

}  // namespace detail

/// Spherically symmetric, nonnegative, compactly supported smooth kernel on
/// R^d that integrates to one. The profile is the standard bump
/// c * exp(-1/(1 - (|u|/r)^2)) inside |u| < r, zero outside; the constant c
/// is fixed by quadrature at construction.
class MollifierKernel {
public:
  MollifierKernel(int dimension, double support_radius = 1.0, double rel_tol = 1e-10)
      : d_(dimension), r_(support_radius), rel_tol_(rel_tol) {
    if (d_ < 1) throw std::invalid_argument("MollifierKernel: dimension must be >= 1");
    if (!(r_ > 0.0)) throw std::invalid_argument("MollifierKernel: support radius must be > 0");
    // total mass = c * S_{d-1} * r^d * int_0^1 s^{d-1} bump(s) ds
    const double radial = integrate(
        [this](double s) { return std::pow(s, d_ - 1) * detail::bump_profile(s); },
        0.0, 1.0, rel_tol_);
    c_ = 1.0 / (detail::unit_sphere_area(d_) * std::pow(r_, d_) * radial);
  }

  int dimension() const { return d_; }
  double support_radius() const { return r_; }
  double normalization() const { return c_; }
  double rel_tol() const { return rel_tol_; }

  /// Kernel value at radius rho >= 0.
  double radial(double rho) const { return c_ * detail::bump_profile(rho / r_); }

  double operator()(std::span<const double> u) const {
    double n2 = 0.0;
    for (double ui : u) n2 += ui * ui;
    return radial(std::sqrt(n2));
  }

  /// d = 1 shortcut.
  double operator()(double u) const { return radial(std::abs(u)); }

  /// Total mass recomputed by quadrature (d-dimensional, via the radial
  /// reduction). Equals 1 up to quadrature error; exposed for verification.
  double integral() const {
    const double radial_mass = integrate(
        [this](double s) { return std::pow(s, d_ - 1) * detail::bump_profile(s); },
        0.0, 1.0, rel_tol_);
    return c_ * detail::unit_sphere_area(d_) * std::pow(r_, d_) * radial_mass;
  }

private:
  int d_;
  double r_;
  double rel_tol_;
  double c_;
};

inline MollifierKernel make_mollifier(int dimension, double support_radius = 1.0,
                                      double rel_tol = 1e-10) {
  return MollifierKernel(dimension, support_radius, rel_tol);
}

/// phi_eps(u) = eps^{-d/2} * phi(u/eps)^{1/2}; zero outside |u| < eps*r.
inline double phi_eps(const MollifierKernel& k, double eps, std::span<const double> u) {
  if (!(eps > 0.0)) throw std::invalid_argument("phi_eps: eps must be > 0");
  double n2 = 0.0;
  for (double ui : u) n2 += ui * ui;
  const double v = k.radial(std::sqrt(n2) / eps);
  return std::pow(eps, -0.5 * k.dimension()) * std::sqrt(v);
}

inline double phi_eps(const MollifierKernel& k, double eps, double u) {
  if (!(eps > 0.0)) throw std::invalid_argument("phi_eps: eps must be > 0");
  const double v = k.radial(std::abs(u) / eps);
  return std::sqrt(v / eps);
}

/// Spatial correlation g_eps(x) = int phi_eps(x+q) phi_eps(q) dq of the noise
/// increments felt by two particles at displacement x (d = 1).
///
/// operator() is normalized by the quadrature value at zero so g_eps(0) == 1
/// holds exactly (the identity int phi_eps^2 = 1 is exact analytically; the
/// raw quadrature value is available through direct()). Values vanish
/// identically for |x| >= 2*eps*r; by default they are tabulated on a uniform
/// 4096-interval grid over [0, 2*eps*r] with 4-point cubic interpolation,
/// since the flow stepper evaluates g_eps O(n^2) times per step.
class CovarianceKernel {
public:
  CovarianceKernel(MollifierKernel kernel, double eps, bool tabulate = true,
                   std::size_t table_intervals = 4096)
      : kernel_(std::move(kernel)), eps_(eps) {
    if (kernel_.dimension() != 1)
      throw std::invalid_argument("CovarianceKernel: requires a d=1 mollifier");
    if (!(eps_ > 0.0)) throw std::invalid_argument("CovarianceKernel: eps must be > 0");
    cutoff_ = 2.0 * eps_ * kernel_.support_radius();
    g0_ = direct(0.0);
    if (tabulate) {
      table_.resize(table_intervals + 1);
      table_step_ = cutoff_ / static_cast<double>(table_intervals);
      for (std::size_t j = 0; j < table_.size(); ++j) {
        const double x = table_step_ * static_cast<double>(j);
        table_[j] = std::clamp(direct(x) / g0_, 0.0, 1.0);
      }
      table_.back() = 0.0;
    }
  }

  double eps() const { return eps_; }
  double cutoff() const { return cutoff_; }
  const MollifierKernel& kernel() const { return kernel_; }
  bool tabulated() const { return !table_.empty(); }

  double operator()(double x) const {
    const double ax = std::abs(x);
    if (ax >= cutoff_) return 0.0;
    if (table_.empty()) return std::clamp(direct(ax) / g0_, 0.0, 1.0);
    return interpolate(ax);
  }

  /// Raw quadrature evaluation (no normalization, no table); the oracle path.
  double direct(double x) const {
    const double ax = std::abs(x);
    if (ax >= cutoff_) return 0.0;
    const double r = kernel_.support_radius();
    const double y = ax / eps_;
    // int sqrt(phi(v+y) phi(v)) dv over the overlap of the two supports
    const double lo = -r;
    const double hi = r - y;
    const auto f = [&](double v) {
      return std::sqrt(kernel_.radial(std::abs(v + y)) * kernel_.radial(std::abs(v)));
    };
    return integrate(f, lo, hi, kernel_.rel_tol());
  }

private:
  double interpolate(double ax) const {
    const double pos = ax / table_step_;
    const std::size_t n = table_.size();
    std::size_t j = static_cast<std::size_t>(pos);
    if (j >= n - 1) return table_[n - 1];
    // 4-point Lagrange cubic on the nodes surrounding ax
    std::size_t base = (j == 0) ? 0 : j - 1;
    if (base + 3 >= n) base = n - 4;
    const double s = pos - static_cast<double>(base);
    const double w0 = -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0;
    const double w1 = s * (s - 2.0) * (s - 3.0) / 2.0;
    const double w2 = -s * (s - 1.0) * (s - 3.0) / 2.0;
    const double w3 = s * (s - 1.0) * (s - 2.0) / 6.0;
    const double v = w0 * table_[base] + w1 * table_[base + 1] + w2 * table_[base + 2] +
                     w3 * table_[base + 3];
    return std::clamp(v, 0.0, 1.0);
  }

  MollifierKernel kernel_;
  double eps_;
  double cutoff_;
  double g0_;
  std::vector<double> table_;
  double table_step_ = 0.0;
};

}  // namespace brownflow

#endif  // BROWNFLOW_MOLLIFIER_HPP

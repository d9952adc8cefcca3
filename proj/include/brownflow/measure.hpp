#ifndef BROWNFLOW_MEASURE_HPP
#define BROWNFLOW_MEASURE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <type_traits>
#include <utility>
#include <vector>

namespace brownflow {

/// Probability measure with finitely many weighted atoms in R^d.
class EmpiricalMeasure {
public:
  EmpiricalMeasure(std::vector<double> atoms_row_major, std::size_t dimension,
                   std::vector<double> weights)
      : dim_(dimension), atoms_(std::move(atoms_row_major)), weights_(std::move(weights)) {
    if (dim_ == 0) throw std::invalid_argument("EmpiricalMeasure: dimension must be >= 1");
    if (weights_.empty()) throw std::invalid_argument("EmpiricalMeasure: need >= 1 atom");
    if (atoms_.size() != weights_.size() * dim_)
      throw std::invalid_argument("EmpiricalMeasure: atom/weight size mismatch");
    double sum = 0.0;
    for (double w : weights_) {
      if (!(w >= 0.0)) throw std::invalid_argument("EmpiricalMeasure: weights must be >= 0");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("EmpiricalMeasure: weights must sum to 1");
    for (double a : atoms_)
      if (!std::isfinite(a)) throw std::invalid_argument("EmpiricalMeasure: atoms must be finite");
  }

  static EmpiricalMeasure uniform(std::vector<double> points_1d) {
    const std::size_t m = points_1d.size();
    if (m == 0) throw std::invalid_argument("EmpiricalMeasure::uniform: no points");
    std::vector<double> w(m, 1.0 / static_cast<double>(m));
    return EmpiricalMeasure(std::move(points_1d), 1, std::move(w));
  }

  static EmpiricalMeasure dirac(std::vector<double> point) {
    const std::size_t d = point.size();
    return EmpiricalMeasure(std::move(point), d, {1.0});
  }

  std::size_t size() const { return weights_.size(); }
  std::size_t dimension() const { return dim_; }
  std::span<const double> atom(std::size_t i) const { return {atoms_.data() + i * dim_, dim_}; }
  double weight(std::size_t i) const { return weights_[i]; }
  std::span<const double> weights() const { return weights_; }
  std::span<const double> atoms_flat() const { return atoms_; }

  double atom_norm(std::size_t i) const {
    double s = 0.0;
    for (double c : atom(i)) s += c * c;
    return std::sqrt(s);
  }

private:
  std::size_t dim_;
  std::vector<double> atoms_;   // row-major, size() * dim_
  std::vector<double> weights_;
};

/// Image of mu0 under a pointwise map. Weights are unchanged and coincident
/// images are kept as distinct atoms (atom identity feeds the diagnostics);
/// use consolidate() to merge them. The map is either double -> double (d=1)
/// or span<const double> -> vector<double>.
template <class F>
EmpiricalMeasure pushforward(const EmpiricalMeasure& mu, F&& map) {
  std::vector<double> out;
  std::size_t out_dim = 0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    std::vector<double> image;
    if constexpr (std::is_invocable_r_v<double, F, double>) {
      if (mu.dimension() != 1)
        throw std::invalid_argument("pushforward: scalar map requires a d=1 measure");
      image = {map(mu.atom(i)[0])};
    } else {
      image = map(mu.atom(i));
    }
    if (image.empty()) throw std::runtime_error("pushforward: flow undefined at an atom");
    for (double c : image)
      if (!std::isfinite(c)) throw std::runtime_error("pushforward: flow undefined at an atom");
    if (i == 0)
      out_dim = image.size();
    else if (image.size() != out_dim)
      throw std::runtime_error("pushforward: inconsistent image dimension");
    out.insert(out.end(), image.begin(), image.end());
  }
  return EmpiricalMeasure(std::move(out), out_dim,
                          std::vector<double>(mu.weights().begin(), mu.weights().end()));
}

/// Merges atoms whose coordinates are bitwise equal, summing weights.
/// The tolerance is exactly zero: coalescence produces bit-identical
/// positions by construction, anything else stays distinct.
inline EmpiricalMeasure consolidate(const EmpiricalMeasure& mu) {
  std::vector<double> atoms;
  std::vector<double> weights;
  const std::size_t d = mu.dimension();
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const auto a = mu.atom(i);
    bool merged = false;
    for (std::size_t k = 0; k < weights.size() && !merged; ++k) {
      bool same = true;
      for (std::size_t c = 0; c < d; ++c)
        if (atoms[k * d + c] != a[c]) {
          same = false;
          break;
        }
      if (same) {
        weights[k] += mu.weight(i);
        merged = true;
      }
    }
    if (!merged) {
      atoms.insert(atoms.end(), a.begin(), a.end());
      weights.push_back(mu.weight(i));
    }
  }
  return EmpiricalMeasure(std::move(atoms), d, std::move(weights));
}

/// phi_0(u) = |u|/(1+|u|), phi_n(u) = |u|^n for n >= 1.
inline double phi_cost(int n, double norm) {
  if (n < 0) throw std::invalid_argument("phi_cost: n must be >= 0");
  if (n == 0) return norm / (1.0 + norm);
  if (n == 1) return norm;
  return std::pow(norm, n);
}

inline double cost_phi_n(int n, std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw std::invalid_argument("cost_phi_n: dimension mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double d = u[k] - v[k];
    s += d * d;
  }
  return phi_cost(n, std::sqrt(s));
}

inline double cost_phi_n(int n, double u, double v) { return phi_cost(n, std::abs(u - v)); }

/// Membership functional of the n-th moment space: sum_i w_i |u_i|^n
/// (always finite for empirical measures; n = 0 gives total mass 1).
inline double moment(const EmpiricalMeasure& mu, int n) {
  if (n < 0) throw std::invalid_argument("moment: n must be >= 0");
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    s += mu.weight(i) * std::pow(mu.atom_norm(i), n);
  return s;
}

/// <g_k, mu> with the Lipschitz-1 ramp g_k(x) = min(max(|x|-k, 0), 1):
/// zero inside the radius-k ball, one outside radius k+1.
inline double tail_mass(const EmpiricalMeasure& mu, int k) {
  if (k < 1) throw std::invalid_argument("tail_mass: k must be >= 1");
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    s += mu.weight(i) * std::clamp(mu.atom_norm(i) - static_cast<double>(k), 0.0, 1.0);
  return s;
}

}  // namespace brownflow

#endif  // BROWNFLOW_MEASURE_HPP

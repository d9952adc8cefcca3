#ifndef BROWNFLOW_STATS_HPP
#define BROWNFLOW_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "brownflow/quadrature.hpp"
#include "brownflow/rng.hpp"
#include "brownflow/samples.hpp"

namespace brownflow {

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// E|Z|^n for standard normal Z: 2^{n/2} Gamma((n+1)/2) / sqrt(pi).
inline double gaussian_abs_moment(int n) {
  if (n < 0) throw std::invalid_argument("gaussian_abs_moment: n must be >= 0");
  return std::pow(2.0, 0.5 * n) * std::tgamma(0.5 * (n + 1)) / std::sqrt(M_PI);
}

/// E f(mean + sd*Z) by adaptive quadrature against the normal density,
/// truncated at 12 standard deviations (tail mass ~ 1e-33).
template <class F>
double gaussian_expectation(F&& f, double mean, double sd, double rel_tol = 1e-10) {
  if (!(sd >= 0.0)) throw std::invalid_argument("gaussian_expectation: sd must be >= 0");
  if (sd == 0.0) return f(mean);
  return integrate([&](double z) { return f(mean + sd * z) * normal_pdf(z); }, -12.0,
                   12.0, rel_tol);
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t count = 0;
};

/// Monte Carlo mean with a batched standard error: values are split into
/// `batches` strata by index (i % batches) and the SE is the dispersion of
/// the batch means. Robust to the heavy tails of power-moment estimators.
inline MeanSe batched_mean_se(std::span<const double> values, int batches = 20) {
  MeanSe out;
  out.count = values.size();
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) /
             static_cast<double>(values.size());
  const int b = std::min<int>(batches, static_cast<int>(values.size()));
  if (b < 2) return out;
  std::vector<double> sums(static_cast<std::size_t>(b), 0.0);
  std::vector<std::size_t> counts(static_cast<std::size_t>(b), 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    sums[i % static_cast<std::size_t>(b)] += values[i];
    counts[i % static_cast<std::size_t>(b)] += 1;
  }
  double mean_of_means = 0.0;
  for (int k = 0; k < b; ++k)
    mean_of_means += sums[static_cast<std::size_t>(k)] /
                     static_cast<double>(counts[static_cast<std::size_t>(k)]);
  mean_of_means /= b;
  double var = 0.0;
  for (int k = 0; k < b; ++k) {
    const double m = sums[static_cast<std::size_t>(k)] /
                     static_cast<double>(counts[static_cast<std::size_t>(k)]);
    var += (m - mean_of_means) * (m - mean_of_means);
  }
  var /= (b - 1);
  out.se = std::sqrt(var / b);
  return out;
}

/// Survival function of the Kolmogorov distribution,
/// Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2).
inline double kolmogorov_q(double lambda) {
  if (lambda <= 0.0) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 128; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += sign * term;
    sign = -sign;
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// lambda with Q(lambda) = alpha (bisection; Q is strictly decreasing).
inline double kolmogorov_critical(double alpha) {
  double lo = 0.05, hi = 4.0;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    (kolmogorov_q(mid) > alpha ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;

  bool pass(double level = 0.01) const { return p_value >= level; }
};

/// One-sample Kolmogorov-Smirnov test against the given CDF, asymptotic
/// p-value with the Stephens small-sample correction.
template <class Cdf>
KsResult ks_test(std::span<const double> samples, Cdf&& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_test: no samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    d = std::max(d, std::max(hi - f, f - lo));
  }
  const double sqn = std::sqrt(n);
  KsResult out;
  out.statistic = d;
  out.n = sorted.size();
  out.p_value = kolmogorov_q((sqn + 0.12 + 0.11 / sqn) * d);
  return out;
}

inline KsResult ks_test_normal(std::span<const double> samples, double mean, double sd) {
  if (!(sd > 0.0)) throw std::invalid_argument("ks_test_normal: sd must be > 0");
  return ks_test(samples, [=](double x) { return normal_cdf((x - mean) / sd); });
}

struct EnergyOptions {
  std::size_t pair_budget = 1'000'000;  // per term; exact all-pairs when cheaper
  std::uint64_t seed = 0x0e17a9d1u;     // subsampling stream
};

namespace detail {

inline double row_distance(const SampleMatrix& a, std::size_t i, const SampleMatrix& b,
                           std::size_t j) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.dim; ++k) {
    const double d = a.data[i * a.dim + k] - b.data[j * b.dim + k];
    s += d * d;
  }
  return std::sqrt(s);
}

inline double mean_cross_distance(const SampleMatrix& a, const SampleMatrix& b,
                                  std::size_t budget, RngStream& rng) {
  const std::size_t na = a.rows(), nb = b.rows();
  double sum = 0.0;
  if (na * nb <= budget) {
    for (std::size_t i = 0; i < na; ++i)
      for (std::size_t j = 0; j < nb; ++j) sum += row_distance(a, i, b, j);
    return sum / (static_cast<double>(na) * static_cast<double>(nb));
  }
  for (std::size_t k = 0; k < budget; ++k) {
    const std::size_t i = rng.next_u64() % na;
    const std::size_t j = rng.next_u64() % nb;
    sum += row_distance(a, i, b, j);
  }
  return sum / static_cast<double>(budget);
}

// V-statistic over ordered pairs (diagonal zeros included), matching the
// normalization of the cross term; identical clouds then give exactly zero.
inline double mean_within_distance(const SampleMatrix& a, std::size_t budget,
                                   RngStream& rng) {
  const std::size_t n = a.rows();
  if (n < 2) return 0.0;
  double sum = 0.0;
  if (n * (n - 1) / 2 <= budget) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) sum += row_distance(a, i, a, j);
    return 2.0 * sum / (static_cast<double>(n) * static_cast<double>(n));
  }
  for (std::size_t k = 0; k < budget; ++k) {
    const std::size_t i = rng.next_u64() % n;
    const std::size_t j = rng.next_u64() % n;
    if (i != j) sum += row_distance(a, i, a, j);
  }
  return sum / static_cast<double>(budget);
}

}  // namespace detail

/// Two-sample energy distance 2 E|A-B| - E|A-A'| - E|B-B'|. Exact all-pairs
/// when each term fits in the pair budget, otherwise deterministic seeded
/// subsampling with `pair_budget` pairs per term.
inline double energy_distance(const SampleMatrix& a, const SampleMatrix& b,
                              EnergyOptions opts = {}) {
  if (a.dim != b.dim) throw std::invalid_argument("energy_distance: dimension mismatch");
  if (a.rows() == 0 || b.rows() == 0)
    throw std::invalid_argument("energy_distance: empty sample");
  RngStream rng(splitmix64(opts.seed));
  const double cross = detail::mean_cross_distance(a, b, opts.pair_budget, rng);
  const double within_a = detail::mean_within_distance(a, opts.pair_budget, rng);
  const double within_b = detail::mean_within_distance(b, opts.pair_budget, rng);
  return 2.0 * cross - within_a - within_b;
}

struct PermutationTestResult {
  double observed = 0.0;
  double null_q99 = 0.0;
  double p_value = 1.0;
  int permutations = 0;
  /// True when the observed statistic is consistent with the permutation
  /// null, i.e. the two samples are not distinguished at the 1% level.
  bool pass = false;
};

/// Two-sample permutation test on the energy distance: labels are reshuffled
/// `permutations` times and the observed statistic is compared with the
/// resampled null at the 99th percentile.
inline PermutationTestResult energy_permutation_test(const SampleMatrix& a,
                                                     const SampleMatrix& b,
                                                     int permutations = 199,
                                                     std::uint64_t seed = 0x9e3779b9u,
                                                     EnergyOptions opts = {}) {
  if (a.dim != b.dim)
    throw std::invalid_argument("energy_permutation_test: dimension mismatch");
  const std::size_t na = a.rows(), nb = b.rows();
  opts.seed = stream_seed(seed, 0);
  PermutationTestResult out;
  out.permutations = permutations;
  out.observed = energy_distance(a, b, opts);

  SampleMatrix pool(a.dim);
  pool.data.reserve(a.data.size() + b.data.size());
  pool.data.insert(pool.data.end(), a.data.begin(), a.data.end());
  pool.data.insert(pool.data.end(), b.data.begin(), b.data.end());
  std::vector<std::size_t> index(na + nb);
  std::iota(index.begin(), index.end(), std::size_t{0});

  RngStream shuffle_rng(stream_seed(seed, 1));
  std::vector<double> null_stats;
  null_stats.reserve(static_cast<std::size_t>(permutations));
  SampleMatrix pa(a.dim), pb(a.dim);
  for (int p = 0; p < permutations; ++p) {
    for (std::size_t i = index.size() - 1; i > 0; --i) {
      const std::size_t j = shuffle_rng.next_u64() % (i + 1);
      std::swap(index[i], index[j]);
    }
    pa.data.clear();
    pb.data.clear();
    for (std::size_t i = 0; i < na; ++i) pa.push_row(pool.row(index[i]));
    for (std::size_t i = na; i < na + nb; ++i) pb.push_row(pool.row(index[i]));
    EnergyOptions perm_opts = opts;
    perm_opts.seed = stream_seed(seed, 2 + static_cast<std::uint64_t>(p));
    null_stats.push_back(energy_distance(pa, pb, perm_opts));
  }
  int greater_equal = 0;
  for (double s : null_stats)
    if (s >= out.observed) ++greater_equal;
  out.p_value = (1.0 + greater_equal) / (permutations + 1.0);
  std::sort(null_stats.begin(), null_stats.end());
  const std::size_t q_idx = static_cast<std::size_t>(
      std::ceil(0.99 * permutations)) - 1;
  out.null_q99 = null_stats[std::min(q_idx, null_stats.size() - 1)];
  out.pass = out.p_value > 0.01;
  return out;
}

}  // namespace brownflow

#endif  // BROWNFLOW_STATS_HPP

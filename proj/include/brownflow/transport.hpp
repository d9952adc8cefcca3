#ifndef BROWNFLOW_TRANSPORT_HPP
#define BROWNFLOW_TRANSPORT_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "brownflow/measure.hpp"

namespace brownflow {

class TransportError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Coupling between two empirical measures: transported mass per atom pair.
/// Row sums over i reproduce mu's weights and column sums nu's weights.
struct TransportPlan {
  struct Entry {
    std::size_t i = 0;   // atom index in mu
    std::size_t j = 0;   // atom index in nu
    double mass = 0.0;
    double cost = 0.0;   // phi_n(u_i - v_j), per unit mass
  };
  std::vector<Entry> entries;
  double total_cost = 0.0;  // sum mass * cost
};

struct WassersteinResult {
  double distance = 0.0;    // total_cost^(1/(n v 1))
  double total_cost = 0.0;  // the bare infimum value
  TransportPlan plan;
};

struct WassersteinOptions {
  /// For n >= 1 in d = 1 the convex-cost optimum is the sorted matching;
  /// set false to force the assignment solver (used by the equivalence tests).
  bool allow_fast_path = true;
  /// Cap on the equal-weight expansion of rational weights.
  std::size_t expansion_budget = 10000;
};

/// Exact linear assignment (Hungarian algorithm with potentials, O(m^3)).
/// cost is row-major m x m; returns the assigned column for each row.
inline std::vector<std::size_t> solve_assignment(const std::vector<double>& cost,
                                                 std::size_t m) {
  if (m == 0 || cost.size() != m * m)
    throw std::invalid_argument("solve_assignment: cost must be a nonempty square matrix");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(m + 1, 0.0), v(m + 1, 0.0), minv(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1, 0);
  for (std::size_t i = 1; i <= m; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(m);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

namespace detail {

/// Smallest common denominator q <= budget such that every weight of both
/// measures equals (integer)/q up to 1e-9; 0 when none exists.
inline std::size_t common_denominator(const EmpiricalMeasure& mu,
                                      const EmpiricalMeasure& nu, std::size_t budget) {
  const auto fits = [](const EmpiricalMeasure& m, std::size_t q) {
    std::size_t total = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double scaled = m.weight(i) * static_cast<double>(q);
      const double rounded = std::round(scaled);
      if (std::abs(scaled - rounded) > 1e-9) return false;
      total += static_cast<std::size_t>(rounded);
    }
    return total == q;
  };
  for (std::size_t q = std::max(mu.size(), nu.size()); q <= budget; ++q)
    if (fits(mu, q) && fits(nu, q)) return q;
  return 0;
}

struct ExpandedAtom {
  std::size_t original = 0;
};

inline std::vector<ExpandedAtom> expand(const EmpiricalMeasure& m, std::size_t q) {
  std::vector<ExpandedAtom> out;
  out.reserve(q);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto copies =
        static_cast<std::size_t>(std::round(m.weight(i) * static_cast<double>(q)));
    for (std::size_t c = 0; c < copies; ++c) out.push_back({i});
  }
  return out;
}

inline TransportPlan aggregate_plan(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                                    int n, const std::vector<ExpandedAtom>& rows,
                                    const std::vector<ExpandedAtom>& cols,
                                    const std::vector<std::size_t>& row_to_col,
                                    std::size_t q) {
  std::map<std::pair<std::size_t, std::size_t>, double> mass;
  for (std::size_t r = 0; r < rows.size(); ++r)
    mass[{rows[r].original, cols[row_to_col[r]].original}] += 1.0 / static_cast<double>(q);
  TransportPlan plan;
  for (const auto& [key, m] : mass) {
    const double c = cost_phi_n(n, mu.atom(key.first), nu.atom(key.second));
    plan.entries.push_back({key.first, key.second, m, c});
    plan.total_cost += m * c;
  }
  return plan;
}

}  // namespace detail

/// Wasserstein distance gamma_n(mu, nu) = (inf coupling cost)^{1/(n v 1)}
/// together with an optimal plan.
///
/// Rational-weight measures are expanded to q equal-weight atoms over a
/// common denominator q (budgeted), where the problem becomes a linear
/// assignment. For n >= 1 in d = 1 the cost is convex in the gap, so the
/// sorted (monotone) matching is optimal and skips the O(q^3) solver; for
/// n = 0 the cost is concave and the assignment solver is always used (the
/// monotone matching can be strictly suboptimal there).
inline WassersteinResult wasserstein(int n, const EmpiricalMeasure& mu,
                                     const EmpiricalMeasure& nu,
                                     WassersteinOptions opts = {}) {
  if (n < 0) throw std::invalid_argument("wasserstein: n must be >= 0");
  if (mu.dimension() != nu.dimension())
    throw std::invalid_argument("wasserstein: dimension mismatch");
  const std::size_t q = detail::common_denominator(mu, nu, opts.expansion_budget);
  if (q == 0)
    throw TransportError(
        "wasserstein: weight expansion exceeds the atom budget; "
        "supply equal-weight atom lists instead");
  const auto rows = detail::expand(mu, q);
  const auto cols = detail::expand(nu, q);

  std::vector<std::size_t> row_to_col;
  if (opts.allow_fast_path && n >= 1 && mu.dimension() == 1) {
    // sort expanded atoms by coordinate (ties by original index, so the
    // pairing is deterministic) and match in order
    auto order = [](const EmpiricalMeasure& m, const std::vector<detail::ExpandedAtom>& v) {
      std::vector<std::size_t> idx(v.size());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const double xa = m.atom(v[a].original)[0];
        const double xb = m.atom(v[b].original)[0];
        if (xa != xb) return xa < xb;
        return v[a].original < v[b].original;
      });
      return idx;
    };
    const auto ro = order(mu, rows);
    const auto co = order(nu, cols);
    row_to_col.resize(q);
    for (std::size_t k = 0; k < q; ++k) row_to_col[ro[k]] = co[k];
  } else {
    std::vector<double> cost(q * q);
    for (std::size_t r = 0; r < q; ++r)
      for (std::size_t c = 0; c < q; ++c)
        cost[r * q + c] = cost_phi_n(n, mu.atom(rows[r].original), nu.atom(cols[c].original));
    row_to_col = solve_assignment(cost, q);
  }

  WassersteinResult out;
  out.plan = detail::aggregate_plan(mu, nu, n, rows, cols, row_to_col, q);
  out.total_cost = out.plan.total_cost;
  out.distance = n <= 1 ? out.total_cost : std::pow(out.total_cost, 1.0 / n);
  return out;
}

}  // namespace brownflow

#endif  // BROWNFLOW_TRANSPORT_HPP

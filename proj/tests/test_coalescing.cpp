#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "brownflow/coalescing.hpp"
#include "brownflow/stats.hpp"

using brownflow::CoalesceConfig;
using brownflow::CoalescingStepper;
using brownflow::bridge_merge_probability;
using brownflow::simulate_coalescing;

namespace {

// P(two independent standard BMs started at gap g meet by time t): the gap is
// a variance-2 BM, so by the reflection principle this is 2(1 - Phi(g/sqrt(2t))).
double meet_probability(double gap, double t) {
  return 2.0 * (1.0 - brownflow::normal_cdf(gap / std::sqrt(2.0 * t)));
}

// streaming merge indicator; avoids storing paths for large M*R
double merge_fraction(const std::vector<double>& starts, double h, std::size_t steps,
                      std::size_t replicas, std::uint64_t seed, bool bridge,
                      unsigned workers) {
  const auto flags = brownflow::map_replicas<char>(replicas, workers, [&](std::size_t i) {
    CoalescingStepper s(starts, h, brownflow::replica_stream(seed, i), bridge);
    for (std::size_t k = 0; k < steps; ++k) s.step();
    return s.block_count() == 1 ? char{1} : char{0};
  });
  double merged = 0.0;
  for (char f : flags) merged += f;
  return merged / static_cast<double>(replicas);
}

}  // namespace

TEST_CASE("bridge merge probability: closed form and limits") {
  CHECK(bridge_merge_probability(1.0, 1.0, 1.0) == std::exp(-1.0));
  CHECK(bridge_merge_probability(1e-12, 0.5, 1.0) == Catch::Approx(1.0).margin(1e-9));
  CHECK(bridge_merge_probability(1.0, 1.0, 1e-6) == Catch::Approx(0.0).margin(1e-12));
  CHECK_THROWS_AS(bridge_merge_probability(0.0, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(bridge_merge_probability(1.0, -1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(bridge_merge_probability(1.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("bridge-hitting formula agrees with fine-grid bridge Monte Carlo") {
  // Brownian bridge with variance parameter 2 from 1 to 1 over [0,1],
  // simulated on 4096 steps; grid simulation misses sub-step excursions and
  // underestimates the hitting probability by about 0.6*sqrt(h), hence the
  // asymmetric slack.
  const int steps = 2048;
  const std::size_t samples = 60000;
  const double h = 1.0 / steps;
  const auto hits = brownflow::map_replicas<char>(samples, 8, [&](std::size_t s) {
    auto rng = brownflow::replica_stream(314159, s);
    double x = 1.0;
    for (int k = 0; k < steps; ++k) {
      const double remaining = 1.0 - k * h;
      const double mean = x + (1.0 - x) * h / remaining;
      const double var = 2.0 * h * (remaining - h) / remaining;
      x = mean + std::sqrt(std::max(var, 0.0)) * rng.normal();
      if (x <= 0.0) return char{1};
    }
    return char{0};
  });
  double est = 0.0;
  for (char c : hits) est += c;
  est /= static_cast<double>(samples);
  const double target = std::exp(-1.0);
  const double se = std::sqrt(target * (1.0 - target) / static_cast<double>(samples));
  CHECK(est <= target + 3.0 * se);
  CHECK(est >= target - 3.0 * se - 0.02);
}

TEST_CASE("single particle is a standard Brownian path") {
  CoalesceConfig cfg;
  cfg.starts = {0.7};
  cfg.step = 1e-3;
  cfg.steps = 1000;
  cfg.replicas = 2000;
  cfg.seed = 21;
  cfg.workers = 4;
  const auto paths = simulate_coalescing(cfg);
  std::vector<double> fin(paths.size());
  for (std::size_t r = 0; r < paths.size(); ++r)
    fin[r] = paths[r].positions.back()[0] - 0.7;
  CHECK(brownflow::ks_test_normal(fin, 0.0, 1.0).pass(0.01));

  // and its realized quadratic variation is t
  double qv = 0.0;
  for (const auto& p : paths)
    for (std::size_t k = 0; k + 1 < p.positions.size(); ++k) {
      const double dx = p.positions[k + 1][0] - p.positions[k][0];
      qv += dx * dx;
    }
  qv /= static_cast<double>(paths.size());
  CHECK(qv > 0.95);
  CHECK(qv < 1.05);
}

TEST_CASE("equal starts are merged from time zero") {
  CoalescingStepper s(std::vector<double>{0.0, 0.0}, 1e-3, brownflow::replica_stream(1, 0));
  CHECK(s.block_count() == 1);
  std::vector<double> x;
  for (int k = 0; k < 100; ++k) {
    s.step();
    s.write_positions(x);
    CHECK(x[0] == x[1]);
  }
}

TEST_CASE("decreasing starts are rejected") {
  CHECK_THROWS_AS(
      CoalescingStepper(std::vector<double>{1.0, 0.0}, 1e-3, brownflow::replica_stream(1, 0)),
      std::invalid_argument);
}

TEST_CASE("merge frequency matches the reflection-principle value") {
  // starts (0,1), t=1: 2(1-Phi(1/sqrt(2))) = 0.4795001...
  const double target = meet_probability(1.0, 1.0);
  CHECK(target == Catch::Approx(0.4795001221869535).epsilon(1e-12));
  const std::size_t replicas = 20000;
  const double est = merge_fraction({0.0, 1.0}, 1e-3, 1000, replicas, 1001, true, 4);
  const double se = std::sqrt(target * (1.0 - target) / static_cast<double>(replicas));
  CHECK(std::abs(est - target) <= 3.0 * se);
}

TEST_CASE("fine-grid simulation without the bridge correction is the error oracle") {
  // With the correction off the merge indicator is biased low; on a fine grid
  // the bias shrinks to a few 1e-3 and the estimate brackets the target.
  const std::size_t replicas = 3000;
  const double est = merge_fraction({0.0, 1.0}, 2e-5, 50000, replicas, 6174, false, 8);
  const double target = meet_probability(1.0, 1.0);
  const double se = std::sqrt(target * (1.0 - target) / static_cast<double>(replicas));
  CHECK(est <= target + 3.0 * se);
  CHECK(est >= target - 3.0 * se - 0.015);
}

TEST_CASE("paths satisfy the coalescence invariants") {
  CoalesceConfig cfg;
  cfg.starts = {0.0, 0.2, 0.5, 1.0};
  cfg.step = 1e-3;
  cfg.steps = 1000;
  cfg.replicas = 200;
  cfg.seed = 31;
  cfg.workers = 4;
  const auto paths = simulate_coalescing(cfg);
  for (const auto& p : paths) {
    // sorted starts stay sorted at every grid time
    for (const auto& row : p.positions)
      for (std::size_t i = 0; i + 1 < row.size(); ++i) CHECK(row[i] <= row[i + 1]);
    // partitions only coarsen, block count nonincreasing
    const auto& events = p.partition.events;
    for (std::size_t e = 1; e < events.size(); ++e) {
      CHECK(brownflow::coarsens(events[e - 1].partition, events[e].partition));
      CHECK(events[e].partition.blocks.size() < events[e - 1].partition.blocks.size());
      CHECK(events[e].time >= events[e - 1].time);
    }
    // merged tags stay bit-identical: check via the final partition
    const auto& final_partition = p.partition.final();
    for (const auto& block : final_partition.blocks) {
      // find the first grid index at/after the block's merge time
      double merge_time = 0.0;
      for (const auto& ev : events)
        if (ev.partition.blocks.size() >= final_partition.blocks.size())
          merge_time = ev.time;
      for (std::size_t k = 0; k < p.times.size(); ++k) {
        if (p.times[k] < merge_time) continue;
        for (int tag = block.lo; tag < block.hi; ++tag)
          CHECK(p.positions[k][static_cast<std::size_t>(tag)] ==
                p.positions[k][static_cast<std::size_t>(tag + 1)]);
      }
    }
  }
}

TEST_CASE("difference of a pair is a martingale through coalescence") {
  const std::vector<double> starts{0.0, 0.5};
  const auto diff = brownflow::map_replicas<double>(20000, 4, [&](std::size_t i) {
    CoalescingStepper s(starts, 1e-3, brownflow::replica_stream(777, i));
    for (int k = 0; k < 1000; ++k) s.step();
    std::vector<double> x;
    s.write_positions(x);
    return x[1] - x[0];
  });
  const auto d = brownflow::batched_mean_se(diff);
  CHECK(std::abs(d.mean - 0.5) <= 3.0 * d.se);
}

TEST_CASE("kpoint marginals: Wiener coordinate, pre-meeting independence, merged pair") {
  CoalesceConfig cfg;
  cfg.starts = {0.0, 3.0};
  cfg.step = 1e-3;
  cfg.steps = 250;  // t = 0.25, meeting essentially impossible from gap 3
  cfg.replicas = 5000;
  cfg.seed = 55;
  cfg.workers = 4;
  const auto paths = simulate_coalescing(cfg);

  const std::vector<std::size_t> tag0{0};
  const auto m0 = brownflow::kpoint_marginal(paths, tag0, 0.25);
  std::vector<double> x0(m0.rows());
  for (std::size_t r = 0; r < m0.rows(); ++r) x0[r] = m0.row(r)[0];
  CHECK(brownflow::ks_test_normal(x0, 0.0, std::sqrt(0.25)).pass(0.01));

  const std::vector<std::size_t> both{0, 1};
  const auto m01 = brownflow::kpoint_marginal(paths, both, 0.25);
  std::vector<double> prod(m01.rows());
  for (std::size_t r = 0; r < m01.rows(); ++r)
    prod[r] = m01.row(r)[0] * (m01.row(r)[1] - 3.0) / 0.25;
  const auto corr = brownflow::batched_mean_se(prod);
  CHECK(std::abs(corr.mean) <= 3.0 * corr.se);

  CHECK_THROWS_AS(brownflow::kpoint_marginal(paths, std::vector<std::size_t>{7}, 0.25),
                  std::out_of_range);
  CHECK_THROWS_AS(brownflow::kpoint_marginal(paths, both, 0.1234567),
                  std::invalid_argument);

  // merged-from-start pair has correlation one (identical columns)
  CoalesceConfig merged_cfg = cfg;
  merged_cfg.starts = {1.0, 1.0};
  merged_cfg.steps = 100;
  merged_cfg.replicas = 500;
  const auto merged_paths = simulate_coalescing(merged_cfg);
  const auto mm = brownflow::kpoint_marginal(merged_paths, both, 0.1);
  for (std::size_t r = 0; r < mm.rows(); ++r) CHECK(mm.row(r)[0] == mm.row(r)[1]);
}

TEST_CASE("projectivity: a 2-of-3 marginal has the law of a fresh pair simulation") {
  const auto final_pair = [](const std::vector<double>& starts, std::size_t a,
                             std::size_t b, std::uint64_t seed) {
    brownflow::SampleMatrix cloud(2);
    const auto rows = brownflow::map_replicas<std::pair<double, double>>(
        3000, 4, [&](std::size_t i) {
          CoalescingStepper s(starts, 1e-3, brownflow::replica_stream(seed, i));
          for (int k = 0; k < 1000; ++k) s.step();
          std::vector<double> x;
          s.write_positions(x);
          return std::pair{x[a], x[b]};
        });
    for (const auto& [xa, xb] : rows) cloud.push_row({xa, xb});
    return cloud;
  };
  const auto cloud3 = final_pair({0.0, 0.5, 1.0}, 0, 2, 91);
  const auto cloud2 = final_pair({0.0, 1.0}, 0, 1, 92);

  brownflow::EnergyOptions opts;
  opts.pair_budget = 200000;
  const auto test = brownflow::energy_permutation_test(cloud3, cloud2, 199, 4711, opts);
  INFO("observed " << test.observed << " q99 " << test.null_q99 << " p " << test.p_value);
  CHECK(test.pass);
}

TEST_CASE("coalescing ensembles are bit-reproducible") {
  CoalesceConfig cfg;
  cfg.starts = {0.0, 1.0};
  cfg.step = 1e-3;
  cfg.steps = 100;
  cfg.replicas = 8;
  cfg.seed = 12;
  cfg.workers = 3;
  const auto a = simulate_coalescing(cfg);
  const auto b = simulate_coalescing(cfg);
  for (std::size_t r = 0; r < a.size(); ++r) {
    CHECK(a[r].positions == b[r].positions);
    CHECK(a[r].partition.events.size() == b[r].partition.events.size());
  }
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "brownflow/rng.hpp"
#include "brownflow/samples.hpp"
#include "brownflow/stats.hpp"

using brownflow::SampleMatrix;
using brownflow::batched_mean_se;
using brownflow::energy_distance;
using brownflow::energy_permutation_test;
using brownflow::gaussian_abs_moment;
using brownflow::gaussian_expectation;
using brownflow::ks_test_normal;
using brownflow::normal_cdf;

TEST_CASE("normal distribution helpers") {
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_cdf(1.959963985) == Catch::Approx(0.975).margin(1e-9));
  CHECK(gaussian_abs_moment(0) == Catch::Approx(1.0).margin(1e-14));
  CHECK(gaussian_abs_moment(1) == Catch::Approx(std::sqrt(2.0 / M_PI)).margin(1e-14));
  CHECK(gaussian_abs_moment(2) == Catch::Approx(1.0).margin(1e-14));
  CHECK(gaussian_abs_moment(3) == Catch::Approx(2.0 * std::sqrt(2.0 / M_PI)).margin(1e-14));
  CHECK(gaussian_abs_moment(4) == Catch::Approx(3.0).margin(1e-13));
}

TEST_CASE("gaussian expectation quadrature") {
  CHECK(gaussian_expectation([](double z) { return z * z; }, 0.0, 1.0) ==
        Catch::Approx(1.0).margin(1e-9));
  // E (u + s Z)^4 = u^4 + 6 u^2 s^2 + 3 s^4
  const double u = 0.7, s = 1.3;
  CHECK(gaussian_expectation([](double x) { return x * x * x * x; }, u, s) ==
        Catch::Approx(std::pow(u, 4) + 6 * u * u * s * s + 3 * std::pow(s, 4))
            .epsilon(1e-9));
  // kinked integrand (absolute moment)
  CHECK(gaussian_expectation([](double x) { return std::abs(x); }, 0.0, 2.0) ==
        Catch::Approx(2.0 * gaussian_abs_moment(1)).epsilon(1e-9));
  CHECK(gaussian_expectation([](double x) { return x; }, 3.0, 0.0) == 3.0);
}

TEST_CASE("batched mean and standard error") {
  std::vector<double> constant(100, 2.5);
  const auto c = batched_mean_se(constant);
  CHECK(c.mean == 2.5);
  CHECK(c.se == 0.0);

  brownflow::RngStream rng(4);
  std::vector<double> draws(40000);
  for (double& d : draws) d = rng.normal();
  const auto m = batched_mean_se(draws);
  CHECK(std::abs(m.mean) < 0.02);
  // SE should approximate 1/sqrt(n) = 0.005
  CHECK(m.se > 0.002);
  CHECK(m.se < 0.009);
}

TEST_CASE("kolmogorov survival function") {
  CHECK(brownflow::kolmogorov_q(0.0) == 1.0);
  CHECK(brownflow::kolmogorov_q(1.627624) == Catch::Approx(0.01).margin(1e-4));
  CHECK(brownflow::kolmogorov_q(0.5) > 0.95);
  CHECK(brownflow::kolmogorov_q(2.5) < 1e-4);
}

TEST_CASE("KS test accepts the true law and rejects a shifted one") {
  brownflow::RngStream rng(99);
  std::vector<double> z(10000);
  for (double& v : z) v = rng.normal();
  CHECK(ks_test_normal(z, 0.0, 1.0).pass(0.01));

  for (double& v : z) v += 0.5;
  CHECK_FALSE(ks_test_normal(z, 0.0, 1.0).pass(0.01));
}

TEST_CASE("energy distance: exact values on degenerate clouds") {
  SampleMatrix a(1), b(1);
  for (int i = 0; i < 100; ++i) {
    a.push_row({0.0});
    b.push_row({1.0});
  }
  CHECK(energy_distance(a, b) == 2.0);
  CHECK(energy_distance(a, a) == 0.0);
}

TEST_CASE("identical clouds give zero, subsampled near-zero") {
  brownflow::RngStream rng(123);
  SampleMatrix a(2);
  for (int i = 0; i < 500; ++i) a.push_row({rng.normal(), rng.normal()});
  CHECK(std::abs(energy_distance(a, a)) < 1e-10);  // all-pairs, up to summation order

  SampleMatrix big(1);
  for (int i = 0; i < 4000; ++i) big.push_row({rng.normal()});
  brownflow::EnergyOptions opts;
  opts.pair_budget = 100000;  // forces subsampling (4000^2 pairs > budget)
  CHECK(std::abs(energy_distance(big, big, opts)) < 0.02);
}

TEST_CASE("energy distance of N(0,1) vs N(1,1) matches the closed form") {
  // E|N(m, s^2)| = s sqrt(2/pi) exp(-m^2/(2 s^2)) + m (1 - 2 Phi(-m/s));
  // cross gaps are N(1,2), within gaps N(0,2). Verified against quadrature.
  const auto folded_mean = [](double m, double s) {
    return s * std::sqrt(2.0 / M_PI) * std::exp(-m * m / (2 * s * s)) +
           m * (1.0 - 2.0 * normal_cdf(-m / s));
  };
  const double s2 = std::sqrt(2.0);
  const double closed = 2.0 * folded_mean(1.0, s2) - 2.0 * folded_mean(0.0, s2);
  const double quad = 2.0 * gaussian_expectation([](double x) { return std::abs(x); }, 1.0, s2) -
                      2.0 * gaussian_expectation([](double x) { return std::abs(x); }, 0.0, s2);
  CHECK(closed == Catch::Approx(quad).epsilon(1e-9));

  brownflow::RngStream rng(2025);
  SampleMatrix a(1), b(1);
  for (int i = 0; i < 10000; ++i) {
    a.push_row({rng.normal()});
    b.push_row({rng.normal() + 1.0});
  }
  const double est = energy_distance(a, b);
  CHECK(std::abs(est - closed) < 0.05 * closed);
}

TEST_CASE("permutation test separates laws and accepts equal ones") {
  brownflow::RngStream rng(31);
  SampleMatrix a(1), b(1), c(1);
  for (int i = 0; i < 1000; ++i) {
    a.push_row({rng.normal()});
    b.push_row({rng.normal()});
    c.push_row({rng.normal() + 1.0});
  }
  const auto same = energy_permutation_test(a, b, 199, 555);
  CHECK(same.pass);
  CHECK(same.p_value > 0.01);

  const auto diff = energy_permutation_test(a, c, 199, 555);
  CHECK_FALSE(diff.pass);
  CHECK(diff.observed > diff.null_q99);
}

TEST_CASE("dimension mismatch is rejected") {
  SampleMatrix a(1), b(2);
  a.push_row({0.0});
  b.push_row({0.0, 1.0});
  CHECK_THROWS_AS(energy_distance(a, b), std::invalid_argument);
}

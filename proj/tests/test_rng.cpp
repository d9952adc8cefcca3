#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "brownflow/parallel.hpp"
#include "brownflow/rng.hpp"

using brownflow::RngStream;

TEST_CASE("same seed reproduces the exact draw sequence") {
  RngStream a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.uniform() == b.uniform());
    CHECK(a.normal() == b.normal());
  }
}

TEST_CASE("replica streams differ") {
  auto a = brownflow::replica_stream(7, 0);
  auto b = brownflow::replica_stream(7, 1);
  int equal = 0;
  for (int i = 0; i < 100; ++i)
    if (a.next_u64() == b.next_u64()) ++equal;
  CHECK(equal == 0);
}

TEST_CASE("normal draws have the right first moments") {
  RngStream rng(123);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0, sum4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum2 += z * z;
    sum4 += z * z * z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(sum2 / n == Catch::Approx(1.0).margin(0.02));
  CHECK(sum4 / n == Catch::Approx(3.0).margin(0.1));
}

TEST_CASE("uniform stays in [0,1)") {
  RngStream rng(5);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("replica results are invariant in the worker count") {
  const auto run = [](unsigned workers) {
    return brownflow::map_replicas<double>(64, workers, [](std::size_t i) {
      auto rng = brownflow::replica_stream(99, i);
      double acc = 0.0;
      for (int k = 0; k < 100; ++k) acc += rng.normal();
      return acc;
    });
  };
  const auto one = run(1);
  const auto four = run(4);
  REQUIRE(one.size() == four.size());
  for (std::size_t i = 0; i < one.size(); ++i) CHECK(one[i] == four[i]);
}

TEST_CASE("exceptions from workers propagate") {
  CHECK_THROWS_AS(brownflow::for_each_replica(
                      8, 4,
                      [](std::size_t i) {
                        if (i == 5) throw std::runtime_error("boom");
                      }),
                  std::runtime_error);
}

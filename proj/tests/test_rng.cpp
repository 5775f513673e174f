#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "txgen/rng.hpp"

using namespace txgen;

TEST_CASE("streams are reproducible and forks are draw-independent") {
  RngStream a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  // fork depends on identity, not on consumption position.
  RngStream c(99), d(99);
  (void)c.next_u64();
  (void)c.next_u64();
  CHECK(c.fork(7).next_u64() == d.fork(7).next_u64());
  CHECK(c.fork("events").next_u64() == d.fork("events").next_u64());
  CHECK(c.fork(7).next_u64() != d.fork(8).next_u64());
}

TEST_CASE("uniform_int covers bounds without bias artifacts") {
  RngStream rng(5);
  std::vector<int> counts(6, 0);
  for (int i = 0; i < 60'000; ++i) {
    const int64_t v = rng.uniform_int(0, 5);
    REQUIRE(v >= 0);
    REQUIRE(v <= 5);
    ++counts[v];
  }
  for (int c : counts) CHECK(std::abs(c - 10'000) < 500);
}

TEST_CASE("normal moments") {
  RngStream rng(11);
  double sum = 0.0, sum2 = 0.0;
  const int n = 200'000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal(2.0, 3.0);
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(mean == doctest::Approx(2.0).epsilon(0.02));
  CHECK(var == doctest::Approx(9.0).epsilon(0.03));
}

TEST_CASE("poisson mean matches and is monotone in lambda for a shared stream") {
  RngStream rng(17);
  double total = 0.0;
  const int n = 100'000;
  for (int i = 0; i < n; ++i) total += static_cast<double>(rng.poisson(2.0));
  CHECK(total / n == doctest::Approx(2.0).epsilon(0.01));

  // Same substream, larger rate => count never decreases (CDF inversion).
  for (int i = 0; i < 2'000; ++i) {
    RngStream s1 = RngStream(42).fork(i);
    RngStream s2 = RngStream(42).fork(i);
    CHECK(s1.poisson(0.7) <= s2.poisson(1.4));
  }

  double big = 0.0;
  for (int i = 0; i < 20'000; ++i) big += static_cast<double>(rng.poisson(37.5));
  CHECK(big / 20'000 == doctest::Approx(37.5).epsilon(0.01));
}

TEST_CASE("pareto follows the target CCDF exponent") {
  RngStream rng(23);
  const double alpha = 2.5;
  const int n = 200'000;
  int above2 = 0, above4 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.pareto(alpha, 1.0);
    REQUIRE(x >= 1.0);
    if (x >= 2.0) ++above2;
    if (x >= 4.0) ++above4;
  }
  // P(X >= t) = t^-(alpha-1)
  CHECK(static_cast<double>(above2) / n ==
        doctest::Approx(std::pow(2.0, -1.5)).epsilon(0.03));
  CHECK(static_cast<double>(above4) / n ==
        doctest::Approx(std::pow(4.0, -1.5)).epsilon(0.06));
}

TEST_CASE("categorical respects weights and rejects bad input") {
  RngStream rng(31);
  const std::vector<double> w = {3.0, 1.0};
  int first = 0;
  for (int i = 0; i < 40'000; ++i) {
    if (rng.categorical(w) == 0) ++first;
  }
  CHECK(static_cast<double>(first) / 40'000 == doctest::Approx(0.75).epsilon(0.02));
  const std::vector<double> zero = {0.0, 0.0};
  CHECK_THROWS(rng.categorical(zero));
}

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "cfn/estimator.hpp"
#include "cfn/rng.hpp"
#include "cfn/stats.hpp"

using namespace cfn;

namespace {

// Exact expectation of the inverse-count estimate by enumerating all
// 2^(d*n) equally likely flip outcomes. Independent of the sampling path:
// flips come straight from the bit pattern.
double enumerate_expected_estimate(int d, int n) {
  const int bits = d * n;
  REQUIRE(bits <= 20);
  const std::uint64_t outcomes = 1ULL << bits;
  double sum = 0.0;
  for (std::uint64_t mask = 0; mask < outcomes; ++mask) {
    Vector z = Vector::Zero(d);
    for (int i = 0; i < n; ++i) {
      Vector c(d);
      for (int j = 0; j < d; ++j)
        c[j] = (mask >> (i * d + j)) & 1u ? 1.0 : -1.0;
      z += c;
    }
    z /= static_cast<double>(n);
    sum += inverse_count_from_mean(z);
  }
  return sum / static_cast<double>(outcomes);
}

double simulate_estimate(int d, std::int64_t n, Rng& rng) {
  Vector z = Vector::Zero(d);
  for (std::int64_t i = 0; i < n; ++i) z += sample_coin_flips(d, rng);
  z /= static_cast<double>(n);
  return inverse_count_from_mean(z);
}

}  // namespace

TEST_CASE("sample_coin_flips basics") {
  Rng rng(42);
  Vector one = sample_coin_flips(1, rng);
  CHECK(one.size() == 1);
  CHECK((one[0] == 1.0 || one[0] == -1.0));

  Rng a(7), b(7);
  CHECK(sample_coin_flips(20, a) == sample_coin_flips(20, b));

  CHECK_THROWS_AS(sample_coin_flips(0, rng), std::invalid_argument);
}

TEST_CASE("sample_coin_flips per-dimension mean is near zero") {
  Rng rng(123);
  const int d = 20;
  const int trials = 100000;
  Vector sums = Vector::Zero(d);
  for (int t = 0; t < trials; ++t) sums += sample_coin_flips(d, rng);
  for (int j = 0; j < d; ++j) {
    const double mean = sums[j] / trials;
    // 3 sigma / sqrt(trials) with sigma = 1
    CHECK(std::abs(mean) < 0.02);
  }
}

TEST_CASE("inverse_count_from_mean exact cases") {
  Rng rng(1);
  // A single coin-flip vector always gives estimate 1.
  for (int d : {1, 3, 20}) {
    Vector c = sample_coin_flips(d, rng);
    CHECK(inverse_count_from_mean(c) == 1.0);
  }
  CHECK(inverse_count_from_mean(Vector::Zero(5)) == 0.0);
  CHECK_THROWS_AS(inverse_count_from_mean(Vector()), std::invalid_argument);
}

TEST_CASE("exhaustive enumeration: d=2 n=2 mean is exactly 1/2") {
  CHECK(enumerate_expected_estimate(2, 2) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("exhaustive enumeration equals 1/n for all d*n <= 16") {
  for (int d = 1; d <= 16; ++d)
    for (int n = 1; d * n <= 16; ++n)
      CHECK(enumerate_expected_estimate(d, n) ==
            doctest::Approx(1.0 / n).epsilon(1e-12));
}

TEST_CASE("bonus_from_inverse_count") {
  CHECK(bonus_from_inverse_count(1.0) == 1.0);
  CHECK(bonus_from_inverse_count(0.0) == 0.0);
  CHECK(bonus_from_inverse_count(0.25) == 0.5);
  CHECK_THROWS_AS(bonus_from_inverse_count(-0.1), std::invalid_argument);
}

TEST_CASE("estimator_variance closed form") {
  CHECK(estimator_variance(1, 1.0) == 0.0);
  CHECK(estimator_variance(2, 3.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(estimator_variance(0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(estimator_variance(2, 0.5), std::invalid_argument);
}

TEST_CASE("estimator_variance n=2 matches enumeration of two flips") {
  // Oracle: enumerate the 4 outcomes of two flips at d=1.
  double mean = 0.0, mean_sq = 0.0;
  for (int a : {-1, 1})
    for (int b : {-1, 1}) {
      const double z = 0.5 * (a + b);
      mean += z * z / 4.0;
      mean_sq += z * z * z * z / 4.0;
    }
  const double var = mean_sq - mean * mean;
  CHECK(var == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(estimator_variance(2, 1.0) == doctest::Approx(var).epsilon(1e-15));
}

TEST_CASE("average_flips validates and averages") {
  Rng rng(3);
  std::vector<Vector> flips = {sample_coin_flips(4, rng), sample_coin_flips(4, rng)};
  MeanFlips mean = average_flips(flips);
  CHECK(mean.sample_count == 2);
  CHECK(mean.entries == ((flips[0] + flips[1]) / 2.0));
  for (int j = 0; j < 4; ++j) CHECK(std::abs(mean.entries[j]) <= 1.0);

  CHECK_THROWS_AS(average_flips({}), std::invalid_argument);
  CHECK_THROWS_AS(average_flips({Vector::Zero(3)}), std::invalid_argument);
}

TEST_CASE("unbiasedness over Monte-Carlo trials") {
  // 3-standard-error bands around 1/n, moderate trial counts to keep the
  // suite fast; the acceptance suite runs the full grid.
  for (std::int64_t n : {std::int64_t{1}, std::int64_t{5}, std::int64_t{25}}) {
    for (int d : {1, 20}) {
      Rng rng(1000 + static_cast<std::uint64_t>(n) * 10 + static_cast<std::uint64_t>(d));
      RunningStats stats;
      const int trials = 20000;
      for (int t = 0; t < trials; ++t) stats.update(simulate_estimate(d, n, rng));
      const double se = standard_error(stats.variance(), stats.count);
      const double expected = 1.0 / static_cast<double>(n);
      if (n == 1)
        CHECK(stats.mean == expected);
      else
        CHECK(std::abs(stats.mean - expected) <= 3.0 * se);
    }
  }
}

TEST_CASE("variance formula matches simulation at d=1") {
  for (std::int64_t n : {std::int64_t{2}, std::int64_t{3}, std::int64_t{10}}) {
    Rng rng(7000 + static_cast<std::uint64_t>(n));
    RunningStats stats;
    const int trials = 200000;
    for (int t = 0; t < trials; ++t) stats.update(simulate_estimate(1, n, rng));
    const double expected = estimator_variance(n, 1.0);
    CHECK(stats.variance() == doctest::Approx(expected).epsilon(0.05));
  }
}

TEST_CASE("d=20 variance is about a twentieth of d=1 variance") {
  const std::int64_t n = 5;
  Rng rng1(81), rng20(82);
  RunningStats v1, v20;
  const int trials = 200000;
  for (int t = 0; t < trials; ++t) v1.update(simulate_estimate(1, n, rng1));
  for (int t = 0; t < trials; ++t) v20.update(simulate_estimate(20, n, rng20));
  CHECK(v20.variance() == doctest::Approx(v1.variance() / 20.0).epsilon(0.10));
}

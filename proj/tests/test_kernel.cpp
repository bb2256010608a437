#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "wassreg/errors.hpp"
#include "wassreg/kernel.hpp"
#include "wassreg/rng.hpp"

using namespace wassreg;
using namespace wassreg::kernel;

TEST_SUITE("kernel") {
  TEST_CASE("kernel weight examples") {
    const double g0 = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    CHECK(kernel_weight(0.0, {Family::gaussian, 1.0, 2}) == doctest::Approx(g0));
    // h^{-d} scaling with d = 2 and h = 2, at u = 1.
    CHECK(kernel_weight(2.0, {Family::gaussian, 2.0, 2}) == doctest::Approx(g0 * std::exp(-0.5) / 4.0));
    CHECK(kernel_weight(0.5, {Family::epanechnikov, 1.0, 3}) == doctest::Approx(0.5625));
    CHECK(kernel_weight(1.0, {Family::epanechnikov, 1.0, 2}) == 0.0);
    CHECK(kernel_weight(7.0, {Family::epanechnikov, 1.0, 2}) == 0.0);
  }

  TEST_CASE("kernel weight rejects bad input") {
    const KernelSpec spec{Family::gaussian, 1.0, 2};
    CHECK_THROWS_AS(kernel_weight(-1.0, spec), ValidationError);
    CHECK_THROWS_AS(kernel_weight(std::numeric_limits<double>::infinity(), spec), ValidationError);
    CHECK_THROWS_AS(kernel_weight(1.0, {Family::gaussian, 0.0, 2}), ValidationError);
    CHECK_THROWS_AS(kernel_weight(1.0, {Family::gaussian, 1.0, 0}), ValidationError);
  }

  TEST_CASE("weights decrease with distance") {
    for (Family f : {Family::gaussian, Family::epanechnikov}) {
      double prev = kernel_weight(0.0, {f, 1.3, 2});
      for (double r = 0.05; r < 3.0; r += 0.05) {
        const double w = kernel_weight(r, {f, 1.3, 2});
        CHECK(w <= prev);
        CHECK(w >= 0.0);
        prev = w;
      }
    }
  }

  TEST_CASE("bandwidth is the scaled k-th order statistic") {
    const std::vector<double> d{5.0, 1.0, 4.0, 2.0, 3.0};
    CHECK(select_bandwidth(d, {1, 1.0}) == 1.0);
    CHECK(select_bandwidth(d, {3, 1.0}) == 3.0);
    CHECK(select_bandwidth(d, {5, 0.5}) == 2.5);
    CHECK_THROWS_AS(select_bandwidth(d, {6, 1.0}), ValidationError);
    CHECK_THROWS_AS(select_bandwidth(d, {0, 1.0}), ValidationError);
    CHECK_THROWS_AS(select_bandwidth(d, {1, -1.0}), ValidationError);
    const std::vector<double> neg{1.0, -2.0};
    CHECK_THROWS_AS(select_bandwidth(neg, {1, 1.0}), ValidationError);
  }

  TEST_CASE("zero distances fall back to the floor") {
    const std::vector<double> d{0.0, 0.0, 8.0};
    CHECK(bandwidth_floor(d) == doctest::Approx(9e-6));
    CHECK(select_bandwidth(d, {2, 1.0}) == doctest::Approx(9e-6));
  }

  TEST_CASE("order statistic and scale covariance properties") {
    Rng rng(21);
    for (int t = 0; t < 200; ++t) {
      std::vector<double> d(1 + rng.below(30));
      for (auto& v : d) v = 0.01 + 10.0 * rng.uniform();
      const BandwidthRule rule{1 + static_cast<int>(rng.below(d.size())), 0.25 + 2.0 * rng.uniform()};
      const double h = select_bandwidth(d, rule);
      auto sorted = d;
      std::sort(sorted.begin(), sorted.end());
      CHECK(h == doctest::Approx(rule.scale * sorted[static_cast<std::size_t>(rule.neighbors) - 1]));
      // Exactly k distances within h / scale.
      const auto within = std::count_if(d.begin(), d.end(), [&](double v) { return v <= h / rule.scale * (1 + 1e-12); });
      CHECK(within >= rule.neighbors);
      auto shuffled = d;
      rng.shuffle(shuffled);
      CHECK(select_bandwidth(shuffled, rule) == h);
      const double c = 0.1 + 5.0 * rng.uniform();
      auto scaled = d;
      for (auto& v : scaled) v *= c;
      CHECK(select_bandwidth(scaled, rule) == doctest::Approx(c * h));
    }
  }

  TEST_CASE("family names round trip") {
    for (Family f : {Family::gaussian, Family::epanechnikov}) CHECK(parse_family(family_name(f)) == f);
    CHECK_THROWS_AS(parse_family("triangle"), ValidationError);
  }
}

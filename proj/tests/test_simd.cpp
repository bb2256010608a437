#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "wassreg/errors.hpp"
#include "wassreg/ot.hpp"
#include "wassreg/rng.hpp"
#include "wassreg/simd.hpp"

using namespace wassreg;

namespace {

std::vector<double> randvec(Rng& rng, std::size_t n, double scale) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

bool close(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max(1.0, std::abs(b)); }

// Resets the process-wide kernel choice when a test ends.
struct SelectGuard {
  ~SelectGuard() { simd::select("auto"); }
};

}  // namespace

TEST_SUITE("simd") {
  TEST_CASE("scalar table is always present") {
    CHECK(std::string(simd::scalar_kernels().name) == "scalar");
    CHECK_THROWS_AS(simd::select("sse9"), ValidationError);
  }

  TEST_CASE("avx2 kernels agree with the scalar reference") {
    if (!simd::avx2_available()) {
      MESSAGE("AVX2 not available; equivalence check skipped");
      return;
    }
    const auto& s = simd::scalar_kernels();
    const auto& v = *simd::avx2_kernels();
    Rng rng(7);
    // Lengths straddle the 4-lane width and its remainders.
    for (std::size_t m : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 63u, 100u, 257u}) {
      for (std::size_t d : {1u, 2u, 3u, 5u}) {
        const auto p = randvec(rng, d, 2.0);
        const auto qt = randvec(rng, d * m, 2.0);
        const auto bias = randvec(rng, m, 1.0);
        const double scale = 0.5 + rng.uniform();
        std::vector<double> out_s(m), out_v(m);
        const double max_s = s.neg_cost_logits(p.data(), qt.data(), m, d, bias.data(), scale, out_s.data());
        const double max_v = v.neg_cost_logits(p.data(), qt.data(), m, d, bias.data(), scale, out_v.data());
        CHECK(close(max_v, max_s, 1e-13));
        for (std::size_t j = 0; j < m; ++j) CHECK(close(out_v[j], out_s[j], 1e-13));

        auto e_s = out_s, e_v = out_s;
        const double sum_s = s.exp_shift_sum(e_s.data(), m, max_s);
        const double sum_v = v.exp_shift_sum(e_v.data(), m, max_s);
        CHECK(close(sum_v, sum_s, 1e-13));
        for (std::size_t j = 0; j < m; ++j) CHECK(std::abs(e_v[j] - e_s[j]) <= 1e-14 + 1e-13 * e_s[j]);

        const auto x = randvec(rng, m, 1.0);
        const auto y = randvec(rng, m, 1.0);
        CHECK(close(v.dot(x.data(), y.data(), m), s.dot(x.data(), y.data(), m), 1e-12));

        auto ys = y, yv = y;
        s.axpy(0.7, x.data(), ys.data(), m);
        v.axpy(0.7, x.data(), yv.data(), m);
        for (std::size_t j = 0; j < m; ++j) CHECK(close(yv[j], ys[j], 1e-14));

        ys = y;
        yv = y;
        s.axpy_shifted(-1.3, x.data(), qt.data(), 0.25, ys.data(), m);
        v.axpy_shifted(-1.3, x.data(), qt.data(), 0.25, yv.data(), m);
        for (std::size_t j = 0; j < m; ++j) CHECK(close(yv[j], ys[j], 1e-13));
      }
    }
  }

  TEST_CASE("exp_shift_sum handles very negative logits") {
    std::vector<double> v{-800.0, 0.0, -1e300, -30.0, -745.2};
    auto w = v;
    const double sum = simd::scalar_kernels().exp_shift_sum(w.data(), w.size(), 0.0);
    CHECK(sum == doctest::Approx(1.0 + std::exp(-30.0)));
    CHECK(w[2] == 0.0);
    if (simd::avx2_available()) {
      auto u = v;
      CHECK(simd::avx2_kernels()->exp_shift_sum(u.data(), u.size(), 0.0) == doctest::Approx(sum));
      CHECK(u[2] == 0.0);
    }
  }

  TEST_CASE("solver results match across kernel sets") {
    if (!simd::avx2_available()) return;
    SelectGuard guard;
    Rng rng(11);
    ot::SinkhornConfig cfg;
    for (int t = 0; t < 5; ++t) {
      const auto a = oracle::random_cloud(rng, 37, 2);
      const auto b = oracle::random_weighted_cloud(rng, 23, 2);
      simd::select("scalar");
      const auto rs = ot::sinkhorn_value_and_grad(a, b, cfg);
      simd::select("avx2");
      const auto rv = ot::sinkhorn_value_and_grad(a, b, cfg);
      CHECK(rv.result.value == doctest::Approx(rs.result.value).epsilon(1e-9));
      CHECK(max_abs_diff(rv.grad, rs.grad) <= 1e-8);
    }
  }
}

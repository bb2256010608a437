#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "wassreg/errors.hpp"
#include "wassreg/maps.hpp"
#include "wassreg/rng.hpp"

using namespace wassreg;
using namespace wassreg::maps;

namespace {

// Deep sets parameters with every layer random, so the map is far from the
// identity.
DeepSetsParams random_deepsets(Rng& rng, std::size_t d, LayerSizes sizes = {8, 4, 8}) {
  auto p = init_deepsets(d, sizes, rng.next_u64());
  for (auto& v : p.head2.weight.storage()) v = 0.3 * rng.normal();
  for (Dense* l : {&p.enc1, &p.enc2, &p.decoder, &p.head1, &p.head2})
    for (auto& b : l->bias) b = 0.1 * rng.normal();
  return p;
}

AffineMap random_affine(Rng& rng, std::size_t d) {
  AffineMap m = AffineMap::identity(d);
  for (auto& v : m.alpha) v = rng.normal();
  for (auto& v : m.B.storage()) v += 0.3 * rng.normal();
  return m;
}

// Hand-written forward pass of the displacement map.
Matrix reference_pushforward(const DeepSetsParams& p, const EmpiricalMeasure& src) {
  const auto dense = [](const Dense& l, const std::vector<double>& x, bool relu) {
    std::vector<double> y(l.out());
    for (std::size_t o = 0; o < l.out(); ++o) {
      double s = l.bias[o];
      for (std::size_t i = 0; i < l.in(); ++i) s += l.weight(o, i) * x[i];
      y[o] = relu ? std::max(0.0, s) : s;
    }
    return y;
  };
  std::vector<double> pooled(p.enc2.out(), 0.0);
  for (std::size_t j = 0; j < src.size(); ++j) {
    const std::vector<double> x(src.point(j).begin(), src.point(j).end());
    const auto h = dense(p.enc2, dense(p.enc1, x, true), true);
    for (std::size_t c = 0; c < h.size(); ++c) pooled[c] += src.weights()[j] * h[c];
  }
  const auto z = dense(p.decoder, pooled, false);
  Matrix out(src.size(), src.dim());
  for (std::size_t j = 0; j < src.size(); ++j) {
    std::vector<double> xz(src.point(j).begin(), src.point(j).end());
    xz.insert(xz.end(), z.begin(), z.end());
    const auto delta = dense(p.head2, dense(p.head1, xz, true), false);
    for (std::size_t c = 0; c < src.dim(); ++c) out(j, c) = src.point(j)[c] + delta[c];
  }
  return out;
}

}  // namespace

TEST_SUITE("maps") {
  TEST_CASE("affine pushforward applies alpha + B x") {
    AffineMap m{{1.0, -1.0}, Matrix{{2.0, 0.0}, {1.0, 3.0}}};
    const double x[2] = {1.0, 2.0};
    const auto y = apply_map(m, x);
    CHECK(y[0] == doctest::Approx(3.0));
    CHECK(y[1] == doctest::Approx(6.0));
    const auto src = EmpiricalMeasure(Matrix{{1.0, 2.0}, {0.0, 0.0}}, {0.3, 0.7});
    const auto out = pushforward(m, src);
    CHECK(out.point(1)[0] == doctest::Approx(1.0));
    CHECK(out.weights()[0] == 0.3);
  }

  TEST_CASE("fresh maps are the identity") {
    Rng rng(31);
    const auto src = oracle::random_weighted_cloud(rng, 9, 3);
    for (Family f : {Family::affine, Family::displacement}) {
      const auto m = init_map(f, 3, {}, 5);
      CHECK(max_abs_diff(pushforward(m, src).points(), src.points()) == 0.0);
    }
  }

  TEST_CASE("displacement forward pass matches a hand-written reference") {
    Rng rng(32);
    for (int t = 0; t < 5; ++t) {
      const std::size_t d = 1 + rng.below(3);
      const auto p = random_deepsets(rng, d);
      const auto src = oracle::random_weighted_cloud(rng, 1 + rng.below(10), d);
      CHECK(max_abs_diff(pushforward(p, src).points(), reference_pushforward(p, src)) <= 1e-12);
    }
  }

  TEST_CASE("displacement needs its context") {
    Rng rng(33);
    const auto p = random_deepsets(rng, 2);
    const double x[2] = {0.0, 1.0};
    CHECK_THROWS_AS(apply_map(p, x), ValidationError);
  }

  TEST_CASE("pushforward commutes with relabelling") {
    Rng rng(34);
    for (int t = 0; t < 20; ++t) {
      const std::size_t d = 1 + rng.below(4);
      const auto src = oracle::random_weighted_cloud(rng, 2 + rng.below(15), d);
      std::vector<std::size_t> perm(src.size());
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      rng.shuffle(perm);
      const TransportMapParams maps[2] = {random_affine(rng, d), random_deepsets(rng, d)};
      for (const auto& m : maps) {
        const auto a = permute(pushforward(m, src), perm);
        const auto b = pushforward(m, permute(src, perm));
        CHECK(max_abs_diff(a.points(), b.points()) <= 1e-12);
        CHECK(a.weights().size() == b.weights().size());
      }
      const auto p = std::get<DeepSetsParams>(maps[1]);
      const auto z1 = deepsets_encode(src, p);
      const auto z2 = deepsets_encode(permute(src, perm), p);
      for (std::size_t c = 0; c < z1.size(); ++c) CHECK(std::abs(z1[c] - z2[c]) <= 1e-12);
    }
  }

  TEST_CASE("vector-Jacobian product matches central differences") {
    Rng rng(35);
    for (int t = 0; t < 10; ++t) {
      const std::size_t d = 1 + rng.below(3);
      const auto src = oracle::random_weighted_cloud(rng, 2 + rng.below(6), d);
      Matrix seed(src.size(), d);
      for (auto& v : seed.storage()) v = rng.normal();
      TransportMapParams m = t % 2 ? TransportMapParams(random_affine(rng, d)) : random_deepsets(rng, d);
      const auto g = flatten(pushforward_vjp(m, src, seed));
      const auto f = [&](const std::vector<double>& theta) {
        TransportMapParams q = m;
        unflatten(theta, q);
        const auto out = pushforward(q, src);
        double s = 0.0;
        for (std::size_t i = 0; i < seed.size(); ++i) s += seed.data()[i] * out.points().data()[i];
        return s;
      };
      CHECK(oracle::rel_error(g, oracle::central_diff(f, flatten(m), 1e-6)) <= 1e-6);
    }
  }

  TEST_CASE("accumulating vjp adds into the buffer") {
    Rng rng(36);
    const auto p = TransportMapParams(random_deepsets(rng, 2));
    const auto src = oracle::random_cloud(rng, 5, 2);
    Matrix seed(5, 2);
    for (auto& v : seed.storage()) v = rng.normal();
    auto acc = zeros_like(p);
    pushforward_vjp_accumulate(p, src, seed, acc);
    pushforward_vjp_accumulate(p, src, seed, acc);
    const auto once = flatten(pushforward_vjp(p, src, seed));
    const auto twice = flatten(acc);
    for (std::size_t i = 0; i < once.size(); ++i) CHECK(twice[i] == doctest::Approx(2.0 * once[i]));
  }

  TEST_CASE("flatten, unflatten and parameter counts") {
    Rng rng(37);
    const LayerSizes s{5, 3, 4};
    const TransportMapParams p = random_deepsets(rng, 2, s);
    // enc1 2->5, enc2 5->5, decoder 5->3, head1 5->4, head2 4->2 (weights + biases).
    CHECK(parameter_count(p) == (10 + 5) + (25 + 5) + (15 + 3) + (20 + 4) + (8 + 2));
    CHECK(parameter_count(AffineMap::identity(3)) == 12);
    auto q = zeros_like(p);
    unflatten(flatten(p), q);
    CHECK(std::get<DeepSetsParams>(q) == std::get<DeepSetsParams>(p));
    std::vector<double> short_vec(3);
    CHECK_THROWS_AS(unflatten(short_vec, q), DimensionError);
  }

  TEST_CASE("json round trip and validation") {
    Rng rng(38);
    const TransportMapParams maps[2] = {random_affine(rng, 3), random_deepsets(rng, 3)};
    for (const auto& m : maps) {
      const auto back = map_from_json(map_to_json(m));
      CHECK(flatten(back) == flatten(m));
      CHECK(family_of(back) == family_of(m));
    }
    CHECK_THROWS_AS(map_from_json(R"({"family":"affine","dim":2,"alpha":[0,0],"B":{"shape":[2,3],"data":[0,0,0,0,0,0]}})"),
                    Error);
    CHECK_THROWS_AS(map_from_json("{"), ParseError);
    AffineMap bad = AffineMap::identity(2);
    bad.alpha[0] = std::nan("");
    CHECK_THROWS_AS(validate(bad), ValidationError);
  }

  TEST_CASE("family names round trip") {
    for (Family f : {Family::affine, Family::displacement}) CHECK(parse_family(family_name(f)) == f);
    CHECK_THROWS_AS(parse_family("spline"), ValidationError);
  }
}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "wassreg/errors.hpp"
#include "wassreg/eval.hpp"
#include "wassreg/rng.hpp"

using namespace wassreg;
using namespace wassreg::eval;

namespace {

eval::RegimeConfig tiny_regime() {
  RegimeConfig c;
  c.n = 8;
  c.k = 10;
  c.reps = 3;
  c.master.n = 20;
  c.master.k = 15;
  c.rule = {3, 1.0};
  c.train.epochs = 3;
  c.train.batch_size = 4;
  c.train.layers = {6, 3, 6};
  c.barycenter_iters = 3;
  return c;
}

// 1D cloud moved a fraction t of the way along its sorted matching to target.
EmpiricalMeasure interpolate_1d(const EmpiricalMeasure& from, const EmpiricalMeasure& to, double t) {
  std::vector<double> x(from.points().storage()), y(to.points().storage());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  Matrix p(x.size(), 1);
  for (std::size_t i = 0; i < x.size(); ++i) p(i, 0) = (1 - t) * x[i] + t * y[i];
  return make_uniform_measure(p);
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("r2w anchors") {
    Rng rng(51);
    const ot::SinkhornConfig cfg;
    const auto target = oracle::random_cloud(rng, 12, 2);
    const auto bary = oracle::random_cloud(rng, 12, 2, 1.0, 1.0);
    const auto pred = oracle::random_cloud(rng, 12, 2, 1.0, 0.3);
    CHECK(r2w(target, target, bary, cfg).r2w == doctest::Approx(1.0));
    CHECK(r2w(target, bary, bary, cfg).r2w == doctest::Approx(0.0).scale(1.0));
    const auto f = r2w(target, pred, bary, cfg);
    CHECK(f.ss_res == doctest::Approx(ot::exact_w2_squared(target, pred)));
    CHECK(f.r2w == doctest::Approx(1.0 - f.ss_res / f.ss_tot));
    CHECK(abs_test_error(target, pred, cfg) == f.ss_res);
  }

  TEST_CASE("r2w arithmetic and Dirac errors") {
    const ot::SinkhornConfig cfg;
    const auto o = make_uniform_measure(Matrix{{0.0, 0.0}});
    const auto one = make_uniform_measure(Matrix{{1.0, 0.0}});
    const auto two = make_uniform_measure(Matrix{{0.0, 2.0}});
    // ss_res = 1, ss_tot = 4.
    CHECK(r2w(o, one, two, cfg).r2w == doctest::Approx(0.75));
    CHECK(abs_test_error(o, make_uniform_measure(Matrix{{3.0, 4.0}}), cfg) == doctest::Approx(25.0));
    CHECK_THROWS_AS(r2w(o, one, o, cfg), DegenerateError);
    CHECK_THROWS_AS(abs_test_error(o, make_uniform_measure(Matrix{{1.0}}), cfg), DimensionError);
  }

  TEST_CASE("r2w is invariant to relabelling any argument") {
    Rng rng(52);
    const ot::SinkhornConfig cfg;
    const auto t = oracle::random_cloud(rng, 9, 2);
    const auto p = oracle::random_cloud(rng, 9, 2, 1.0, 0.2);
    const auto b = oracle::random_cloud(rng, 9, 2, 1.0, 1.0);
    std::vector<std::size_t> perm(9);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    const double base = r2w(t, p, b, cfg).r2w;
    for (int k = 0; k < 5; ++k) {
      rng.shuffle(perm);
      CHECK(r2w(permute(t, perm), p, b, cfg).r2w == doctest::Approx(base).epsilon(1e-9));
      CHECK(r2w(t, permute(p, perm), b, cfg).r2w == doctest::Approx(base).epsilon(1e-9));
      CHECK(r2w(t, p, permute(b, perm), cfg).r2w == doctest::Approx(base).epsilon(1e-9));
    }
  }

  TEST_CASE("moving the prediction toward the target never lowers r2w") {
    Rng rng(53);
    const ot::SinkhornConfig cfg;
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t k = 3 + rng.below(10);
      const auto target = oracle::random_cloud(rng, k, 1);
      const auto start = oracle::random_cloud(rng, k, 1, 2.0, 1.0);
      const auto bary = oracle::random_cloud(rng, k, 1, 1.0, -2.0);
      double prev = -1e300;
      for (double t = 0.0; t <= 1.0 + 1e-12; t += 0.1) {
        const double r = r2w(target, interpolate_1d(start, target, t), bary, cfg).r2w;
        CHECK(r >= prev - 1e-12);
        prev = r;
      }
      CHECK(prev == doctest::Approx(1.0));
    }
  }

  TEST_CASE("sinkhorn and exact backends agree on small supports") {
    Rng rng(54);
    ot::SinkhornConfig cfg;
    cfg.tol = 1e-10;
    cfg.max_iters = 20000;
    for (int trial = 0; trial < 10; ++trial) {
      const auto t = oracle::random_cloud(rng, 6, 2);
      const auto p = oracle::random_cloud(rng, 6, 2, 1.0, 1.5);
      const auto b = oracle::random_cloud(rng, 6, 2, 1.0, 4.0);
      cfg.blur = 0.01 * std::max(diameter(t, p), diameter(t, b));
      const auto ex = r2w(t, p, b, cfg, Backend::exact);
      const auto sk = r2w(t, p, b, cfg, Backend::sinkhorn);
      CHECK(sk.ss_res == doctest::Approx(ex.ss_res).epsilon(0.02));
      CHECK(sk.ss_tot == doctest::Approx(ex.ss_tot).epsilon(0.02));
    }
  }

  TEST_CASE("summary statistics") {
    std::vector<RepResult> runs(3);
    const double errs[3] = {1.0, 2.0, 4.0};
    for (int i = 0; i < 3; ++i) {
      runs[i].ok = true;
      runs[i].abs_err = errs[i];
      runs[i].fit.r2w = 0.5 + 0.1 * i;
    }
    auto rep = summarize(2, 10, 20, runs);
    CHECK(rep.abs_err_mean == doctest::Approx(7.0 / 3.0));
    CHECK(rep.abs_err_std == doctest::Approx(std::sqrt(((16.0 + 1.0 + 25.0) / 9.0) / 3.0)));
    CHECK(rep.r2w_mean == doctest::Approx(0.6));
    runs[1].ok = false;
    rep = summarize(2, 10, 20, runs);
    CHECK(rep.failures == 1);
    CHECK(rep.abs_err_mean == doctest::Approx(2.5));
    CHECK(summarize(2, 10, 20, {runs[0]}).abs_err_std == 0.0);
  }

  TEST_CASE("csv layout") {
    CHECK(csv_header() == "d,n,k,reps,abs_err_mean,abs_err_std,r2w_mean");
    EvalReport r;
    r.d = 2;
    r.n = 100;
    r.k = 1000;
    r.reps = 10;
    r.abs_err_mean = 0.01922;
    r.abs_err_std = 0.00694;
    r.r2w_mean = 0.99977;
    CHECK(csv_row(r) == "2,100,1000,10,0.01922,0.00694,0.99977");
  }

  TEST_CASE("regime is deterministic and independent of the thread count") {
    auto cfg = tiny_regime();
    const auto master = datagen::gen_gmm_pairs(cfg.master);
    const auto a = run_regime(cfg, master);
    cfg.jobs = 3;
    const auto b = run_regime(cfg, master);
    CHECK(a.failures == 0);
    CHECK(csv_row(a) == csv_row(b));
    for (int i = 0; i < cfg.reps; ++i) {
      CHECK(a.runs[i].test_pair_id == b.runs[i].test_pair_id);
      CHECK(a.runs[i].abs_err == b.runs[i].abs_err);
    }
    CHECK(a.runs[0].test_pair_id != a.runs[1].test_pair_id);
  }

  TEST_CASE("failed repetitions are reported") {
    auto cfg = tiny_regime();
    cfg.reps = 2;
    cfg.train.kernel = kernel::Family::epanechnikov;
    cfg.rule = {1, 1.0};
    const auto rep = run_regime(cfg, datagen::gen_gmm_pairs(cfg.master));
    CHECK(rep.failures == 2);
    CHECK(rep.runs.size() == 2);
    CHECK(rep.runs[0].error.find("kernel weight") != std::string::npos);
    CHECK(std::isnan(rep.r2w_mean));
  }
}

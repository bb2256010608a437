#include "wassreg/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

#include "wassreg/errors.hpp"
#include "wassreg/rng.hpp"

namespace wassreg::eval {

double w2_squared(const EmpiricalMeasure& a, const EmpiricalMeasure& b, const ot::SinkhornConfig& cfg,
                  Backend backend) {
  if (a.dim() != b.dim()) throw DimensionError("w2_squared: dimension mismatch");
  if (backend == Backend::exact || (backend == Backend::automatic && a.size() * b.size() <= ot::kExactSizeLimit))
    return ot::exact_w2_squared(a, b);
  return std::max(0.0, ot::sinkhorn_divergence(a, b, cfg).value);
}

R2Fragment r2w(const EmpiricalMeasure& target, const EmpiricalMeasure& prediction,
               const EmpiricalMeasure& barycenter, const ot::SinkhornConfig& cfg, Backend backend) {
  R2Fragment f;
  f.ss_res = w2_squared(target, prediction, cfg, backend);
  f.ss_tot = w2_squared(target, barycenter, cfg, backend);
  if (f.ss_tot <= 1e-12)
    throw DegenerateError("R2_W undefined: the target coincides with the barycenter (SS_tot <= 1e-12)");
  f.r2w = 1.0 - f.ss_res / f.ss_tot;
  return f;
}

double abs_test_error(const EmpiricalMeasure& target, const EmpiricalMeasure& prediction,
                      const ot::SinkhornConfig& cfg, Backend backend) {
  return w2_squared(target, prediction, cfg, backend);
}

void RegimeConfig::validate() const {
  master.validate();
  rule.validate();
  train.validate();
  if (n < 2) throw ValidationError("regime: n must be >= 2 (one pair is held out)");
  if (k < 1) throw ValidationError("regime: k must be >= 1");
  if (reps < 1) throw ValidationError("regime: reps must be >= 1");
  if (barycenter_iters < 0) throw ValidationError("regime: barycenter_iters must be >= 0");
  if (jobs < 1) throw ValidationError("regime: jobs must be >= 1");
}

RepResult run_repetition(const RegimeConfig& cfg, const RegressionDataset& master, int rep) {
  RepResult r;
  r.rep = rep;
  r.subset_seed = derive_seed(cfg.subset_seed, static_cast<std::uint64_t>(rep));
  try {
    const RegressionDataset sub = datagen::subsample_regime(master, cfg.n, cfg.k, r.subset_seed);
    const MeasurePair& test = sub[0];
    r.test_pair_id = test.id;
    RegressionDataset train_set(sub.dim());
    for (std::size_t i = 1; i < sub.size(); ++i) train_set.add(sub[i]);

    train::TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.train.seed, static_cast<std::uint64_t>(rep));
    kernel::BandwidthRule rule = cfg.rule;
    rule.neighbors = std::min(rule.neighbors, static_cast<int>(train_set.size()));
    const auto model = train::fit_local_map(test.source, train_set, cfg.family, rule, tc);
    r.bandwidth = model.kernel.bandwidth;
    r.pairs_used = model.included_pair_ids.size();
    const auto prediction = maps::pushforward(model.map, test.source);

    std::vector<EmpiricalMeasure> targets;
    targets.reserve(train_set.size());
    for (const auto& p : train_set.pairs()) targets.push_back(p.target);
    const auto bary = ot::free_support_barycenter(targets, cfg.k, cfg.train.sinkhorn, cfg.barycenter_iters);

    r.fit = r2w(test.target, prediction, bary, cfg.train.sinkhorn, cfg.backend);
    r.abs_err = r.fit.ss_res;
    r.ok = true;
    r.source = test.source;
    r.prediction = prediction;
    r.target = test.target;
  } catch (const Error& e) {
    r.ok = false;
    r.error = e.what();
  }
  return r;
}

EvalReport summarize(std::size_t d, std::size_t n, std::size_t k, std::vector<RepResult> runs) {
  EvalReport rep;
  rep.d = d;
  rep.n = n;
  rep.k = k;
  rep.reps = static_cast<int>(runs.size());
  rep.runs = std::move(runs);
  std::size_t ok = 0;
  for (const auto& r : rep.runs) {
    if (!r.ok) {
      ++rep.failures;
      continue;
    }
    ++ok;
    rep.abs_err_mean += r.abs_err;
    rep.r2w_mean += r.fit.r2w;
  }
  if (ok == 0) {
    rep.abs_err_mean = rep.abs_err_std = rep.r2w_mean = std::nan("");
    return rep;
  }
  rep.abs_err_mean /= static_cast<double>(ok);
  rep.r2w_mean /= static_cast<double>(ok);
  double var = 0.0;
  for (const auto& r : rep.runs)
    if (r.ok) var += (r.abs_err - rep.abs_err_mean) * (r.abs_err - rep.abs_err_mean);
  rep.abs_err_std = std::sqrt(var / static_cast<double>(ok));
  return rep;
}

EvalReport run_regime(const RegimeConfig& cfg, const RegressionDataset& master) {
  cfg.validate();
  std::vector<RepResult> runs(static_cast<std::size_t>(cfg.reps));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < cfg.reps; i = next++) runs[static_cast<std::size_t>(i)] = run_repetition(cfg, master, i);
  };
  const int threads = std::min(cfg.jobs, cfg.reps);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return summarize(master.dim(), cfg.n, cfg.k, std::move(runs));
}

EvalReport run_regime(const RegimeConfig& cfg) {
  cfg.validate();
  return run_regime(cfg, datagen::gen_gmm_pairs(cfg.master));
}

std::string csv_header() { return "d,n,k,reps,abs_err_mean,abs_err_std,r2w_mean"; }

std::string csv_row(const EvalReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%d,%.9g,%.9g,%.9g", r.d, r.n, r.k, r.reps, r.abs_err_mean,
                r.abs_err_std, r.r2w_mean);
  return buf;
}

}  // namespace wassreg::eval

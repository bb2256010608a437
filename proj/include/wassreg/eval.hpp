#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wassreg/datagen.hpp"
#include "wassreg/kernel.hpp"
#include "wassreg/maps.hpp"
#include "wassreg/measures.hpp"
#include "wassreg/ot.hpp"
#include "wassreg/train.hpp"

namespace wassreg::eval {

// Squared W2 used for evaluation: exact when k_a * k_b <= ot::kExactSizeLimit,
// the debiased Sinkhorn divergence otherwise.
enum class Backend { automatic, exact, sinkhorn };
double w2_squared(const EmpiricalMeasure& a, const EmpiricalMeasure& b, const ot::SinkhornConfig& cfg,
                  Backend backend = Backend::automatic);

struct R2Fragment {
  double ss_res = 0.0;  // W2^2(target, prediction)
  double ss_tot = 0.0;  // W2^2(target, barycenter)
  double r2w = 0.0;     // 1 - ss_res / ss_tot
};

// Throws DegenerateError when ss_tot <= 1e-12.
R2Fragment r2w(const EmpiricalMeasure& target, const EmpiricalMeasure& prediction,
               const EmpiricalMeasure& barycenter, const ot::SinkhornConfig& cfg,
               Backend backend = Backend::automatic);

// W2^2(target, prediction); the same quantity as R2Fragment::ss_res.
double abs_test_error(const EmpiricalMeasure& target, const EmpiricalMeasure& prediction,
                      const ot::SinkhornConfig& cfg, Backend backend = Backend::automatic);

struct RegimeConfig {
  std::size_t n = 100;
  std::size_t k = 100;
  int reps = 5;
  // Master dataset the regime subsamples from; its dim is the regime's d.
  datagen::GmmGenConfig master = [] {
    datagen::GmmGenConfig g;
    g.n = 200;
    g.k = 200;
    return g;
  }();
  std::uint64_t subset_seed = 1;
  // neighbors is capped at the number of training pairs (n - 1).
  kernel::BandwidthRule rule{.neighbors = 10, .scale = 1.0};
  // Desk-scale training budget.
  train::TrainConfig train = [] {
    train::TrainConfig t;
    t.epochs = 40;
    return t;
  }();
  maps::Family family = maps::Family::displacement;
  int barycenter_iters = 30;
  Backend backend = Backend::automatic;
  int jobs = 1;

  void validate() const;
};

struct RepResult {
  int rep = 0;
  std::uint64_t subset_seed = 0;
  bool ok = false;
  std::string error;  // set when !ok
  std::uint64_t test_pair_id = 0;
  double abs_err = 0.0;
  R2Fragment fit;
  double bandwidth = 0.0;
  std::size_t pairs_used = 0;
  // Kept for plotting.
  std::optional<EmpiricalMeasure> source, prediction, target;
};

struct EvalReport {
  std::size_t d = 0, n = 0, k = 0;
  int reps = 0;
  std::vector<RepResult> runs;
  // Over successful repetitions; std is the population standard deviation
  // (0 for a single repetition).
  double abs_err_mean = 0.0;
  double abs_err_std = 0.0;
  double r2w_mean = 0.0;
  int failures = 0;
};

// One repetition: subsample (n, k) with a derived subset seed, hold out the
// first subsampled pair, fit a local map at its source on the rest, predict,
// and score against the barycenter of the training targets (support k).
RepResult run_repetition(const RegimeConfig& cfg, const RegressionDataset& master, int rep);

// All repetitions (up to cfg.jobs threads), reduced in repetition order.
// Failed repetitions stay in `runs` with their error text.
EvalReport run_regime(const RegimeConfig& cfg, const RegressionDataset& master);
EvalReport run_regime(const RegimeConfig& cfg);

EvalReport summarize(std::size_t d, std::size_t n, std::size_t k, std::vector<RepResult> runs);

std::string csv_header();  // d,n,k,reps,abs_err_mean,abs_err_std,r2w_mean
std::string csv_row(const EvalReport& report);

}  // namespace wassreg::eval

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wassreg/adam.hpp"
#include "wassreg/kernel.hpp"
#include "wassreg/maps.hpp"
#include "wassreg/measures.hpp"
#include "wassreg/ot.hpp"

namespace wassreg::train {

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 16;
  int epochs = 200;
  // Blur 0.15. Each pair's solve is warm-started from its previous step, so
  // a looser potential tolerance than the library default suffices.
  ot::SinkhornConfig sinkhorn = [] {
    ot::SinkhornConfig c;
    c.tol = 1e-4;
    return c;
  }();
  // Pairs whose kernel weight is below weight_floor * (largest weight) are
  // dropped before training.
  double weight_floor = 1e-3;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  kernel::Family kernel = kernel::Family::gaussian;
  maps::LayerSizes layers;

  AdamConfig adam() const { return {learning_rate, beta1, beta2, adam_epsilon}; }
  void validate() const;
};

struct TrainedLocalModel {
  EmpiricalMeasure reference;
  maps::TransportMapParams map;
  kernel::KernelSpec kernel;
  kernel::BandwidthRule rule;
  std::vector<std::uint64_t> included_pair_ids;
  // Raw kernel weights of the included pairs, same order as the ids.
  std::vector<double> included_weights;
  // One entry per epoch: weighted loss of the batches evaluated before
  // their parameter updates, with per-batch weights normalised to mean one.
  std::vector<double> loss_history;
  // Distance from the reference to the nearest training source.
  double nearest_distance = 0.0;
  TrainConfig config;
};

// Distance between measures used for kernel weights and model routing:
// exact W2 when k_a * k_b <= kExactDistanceLimit, otherwise the square root
// of the debiased Sinkhorn divergence.
inline constexpr std::size_t kExactDistanceLimit = 250'000;
double w2_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b, const ot::SinkhornConfig& cfg);

// (1/n) sum_i weights[i] * S_eps(T # source_i, target_i).
double weighted_loss(const maps::TransportMapParams& map, std::span<const MeasurePair> pairs,
                     std::span<const double> weights, const ot::SinkhornConfig& cfg);

struct LossAndGrad {
  double loss = 0.0;
  maps::TransportMapParams grad;
};

// Loss as in weighted_loss plus its gradient with respect to every map
// parameter. `target_self` optionally carries cached OT_eps(target_i,
// target_i) terms, one per pair. `warm`, when non-empty, holds one
// warm start per pair: it seeds each solve and receives its potentials.
LossAndGrad weighted_loss_and_grad(const maps::TransportMapParams& map, std::span<const MeasurePair> pairs,
                                   std::span<const double> weights, const ot::SinkhornConfig& cfg,
                                   std::span<const ot::SelfTerm> target_self = {},
                                   std::span<ot::WarmStart> warm = {});

// Scales weights to mean one (left as zeros when they sum to zero).
std::vector<double> normalize_mean_one(std::span<const double> weights);

// Kernel-weighted fit of one local map around `reference`: bandwidth from
// the nearest-neighbour rule on distances to all training sources, weights
// h^{-d} K(dist/h), truncation at weight_floor, then Adam over seeded
// mini-batches (full batch when the survivors fit in one). Throws
// SupportError when nothing survives and TrainingError on a non-finite loss.
TrainedLocalModel fit_local_map(const EmpiricalMeasure& reference, const RegressionDataset& data,
                                maps::Family family, const kernel::BandwidthRule& rule, const TrainConfig& cfg);

struct Prediction {
  EmpiricalMeasure measure;
  std::size_t model_index = 0;
  double distance = 0.0;
};

// Routes test_source to the model whose reference is nearest (ties go to
// the lowest index) and pushes it through that model's map.
Prediction predict(std::span<const TrainedLocalModel> models, const EmpiricalMeasure& test_source,
                   const ot::SinkhornConfig& cfg);

// Farthest-point traversal over training sources: start at pair 0, then
// repeatedly add the source farthest from every chosen one (ties to the
// lowest index). Returns m pair indices in selection order.
std::vector<std::size_t> greedy_references(const RegressionDataset& data, std::size_t m,
                                           const ot::SinkhornConfig& cfg);

std::string model_to_json(const TrainedLocalModel& model);
TrainedLocalModel model_from_json(std::string_view text);
void save_model(const TrainedLocalModel& model, const std::filesystem::path& path);
TrainedLocalModel load_model(const std::filesystem::path& path);

}  // namespace wassreg::train

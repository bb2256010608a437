#include "wassreg/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "wassreg/errors.hpp"
#include "wassreg/rng.hpp"

namespace wassreg::train {

void TrainConfig::validate() const {
  adam().validate();
  if (batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
  if (epochs < 1) throw ValidationError("train: epochs must be >= 1");
  if (!(weight_floor >= 0.0 && weight_floor < 1.0)) throw ValidationError("train: weight_floor must lie in [0, 1)");
  if (layers.encoder == 0 || layers.context == 0 || layers.head == 0)
    throw ValidationError("train: layer sizes must be >= 1");
  sinkhorn.validate();
}

double w2_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b, const ot::SinkhornConfig& cfg) {
  if (a.size() * b.size() <= kExactDistanceLimit) return std::sqrt(ot::exact_w2_squared(a, b));
  return std::sqrt(std::max(0.0, ot::sinkhorn_divergence(a, b, cfg).value));
}

namespace {

void check_pairs(const maps::TransportMapParams& map, std::span<const MeasurePair> pairs,
                 std::span<const double> weights) {
  if (pairs.size() != weights.size()) throw DimensionError("weighted_loss: one weight per pair required");
  for (double w : weights)
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("weighted_loss: weights must be finite and >= 0");
  const std::size_t d = maps::map_dim(map);
  for (const auto& p : pairs)
    if (p.source.dim() != d || p.target.dim() != d) throw DimensionError("weighted_loss: pair dimension mismatch");
}

}  // namespace

double weighted_loss(const maps::TransportMapParams& map, std::span<const MeasurePair> pairs,
                     std::span<const double> weights, const ot::SinkhornConfig& cfg) {
  check_pairs(map, pairs, weights);
  if (pairs.empty()) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(pairs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (weights[i] == 0.0) continue;
    const auto pushed = maps::pushforward(map, pairs[i].source);
    total += weights[i] * inv_n * ot::sinkhorn_divergence(pushed, pairs[i].target, cfg).value;
  }
  return total;
}

LossAndGrad weighted_loss_and_grad(const maps::TransportMapParams& map, std::span<const MeasurePair> pairs,
                                   std::span<const double> weights, const ot::SinkhornConfig& cfg,
                                   std::span<const ot::SelfTerm> target_self, std::span<ot::WarmStart> warm) {
  check_pairs(map, pairs, weights);
  if (!target_self.empty() && target_self.size() != pairs.size())
    throw DimensionError("weighted_loss_and_grad: one cached self term per pair required");
  if (!warm.empty() && warm.size() != pairs.size())
    throw DimensionError("weighted_loss_and_grad: one warm start per pair required");
  LossAndGrad out{0.0, maps::zeros_like(map)};
  if (pairs.empty()) return out;
  const double inv_n = 1.0 / static_cast<double>(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (weights[i] == 0.0) continue;
    const double c = weights[i] * inv_n;
    const auto pushed = maps::pushforward(map, pairs[i].source);
    std::optional<ot::SelfTerm> self;
    if (!target_self.empty()) self = target_self[i];
    ot::WarmStart* ws = warm.empty() ? nullptr : &warm[i];
    auto vg = ot::sinkhorn_value_and_grad(pushed, pairs[i].target, cfg, self, ws);
    if (ws) *ws = {std::move(vg.result.potential_a), std::move(vg.result.potential_b),
                   std::move(vg.result.potential_self_a)};
    out.loss += c * vg.result.value;
    vg.grad *= c;
    maps::pushforward_vjp_accumulate(map, pairs[i].source, vg.grad, out.grad);
  }
  return out;
}

std::vector<double> normalize_mean_one(std::span<const double> weights) {
  std::vector<double> out(weights.begin(), weights.end());
  const double total = std::accumulate(out.begin(), out.end(), 0.0);
  if (total > 0.0) {
    const double s = static_cast<double>(out.size()) / total;
    for (auto& w : out) w *= s;
  }
  return out;
}

TrainedLocalModel fit_local_map(const EmpiricalMeasure& reference, const RegressionDataset& data,
                                maps::Family family, const kernel::BandwidthRule& rule, const TrainConfig& cfg) {
  cfg.validate();
  rule.validate();
  if (data.empty()) throw ValidationError("fit: dataset has no pairs");
  if (reference.dim() != data.dim()) throw DimensionError("fit: reference dimension differs from the dataset");
  if (static_cast<std::size_t>(rule.neighbors) > data.size())
    throw ValidationError("fit: bandwidth rule needs " + std::to_string(rule.neighbors) + " neighbours, dataset has " +
                          std::to_string(data.size()) + " pairs");

  std::vector<double> dists(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) dists[i] = w2_distance(reference, data[i].source, cfg.sinkhorn);
  const double h = kernel::select_bandwidth(dists, rule);
  const kernel::KernelSpec spec{cfg.kernel, h, static_cast<int>(data.dim())};

  std::vector<double> kw(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) kw[i] = kernel::kernel_weight(dists[i], spec);
  const double wmax = *std::max_element(kw.begin(), kw.end());
  const double nearest = *std::min_element(dists.begin(), dists.end());

  TrainedLocalModel model{reference, maps::init_map(family, data.dim(), cfg.layers, derive_seed(cfg.seed, 1)),
                          spec, rule, {}, {}, {}, nearest, cfg};
  std::vector<MeasurePair> pairs;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (kw[i] > 0.0 && kw[i] >= cfg.weight_floor * wmax) {
      pairs.push_back(data[i]);
      model.included_pair_ids.push_back(data[i].id);
      model.included_weights.push_back(kw[i]);
    }
  }
  if (pairs.empty()) {
    std::ostringstream msg;
    msg << "no training pair has positive kernel weight at bandwidth h=" << h << " (nearest source at distance "
        << nearest << "); increase the bandwidth scale or neighbour count";
    throw SupportError(msg.str());
  }

  std::vector<ot::SelfTerm> self(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) self[i] = ot::self_transport(pairs[i].target, cfg.sinkhorn);

  const std::size_t total = pairs.size();
  const std::size_t batch = std::min<std::size_t>(total, static_cast<std::size_t>(cfg.batch_size));
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffler(derive_seed(cfg.seed, 2));
  AdamState adam;
  const AdamConfig adam_cfg = cfg.adam();
  std::vector<double> params = maps::flatten(model.map);

  std::vector<ot::WarmStart> warm(total);
  std::vector<MeasurePair> bp;
  std::vector<double> bw;
  std::vector<ot::SelfTerm> bs;
  std::vector<ot::WarmStart> bws;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (batch < total) shuffler.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < total; start += batch) {
      const std::size_t end = std::min(total, start + batch);
      bp.clear();
      bw.clear();
      bs.clear();
      bws.clear();
      for (std::size_t t = start; t < end; ++t) {
        bp.push_back(pairs[order[t]]);
        bw.push_back(model.included_weights[order[t]]);
        bs.push_back(self[order[t]]);
        bws.push_back(std::move(warm[order[t]]));
      }
      const auto w = normalize_mean_one(bw);
      const LossAndGrad lg = weighted_loss_and_grad(model.map, bp, w, cfg.sinkhorn, bs, bws);
      for (std::size_t t = start; t < end; ++t) warm[order[t]] = std::move(bws[t - start]);
      const auto g = maps::flatten(lg.grad);
      const bool finite = std::isfinite(lg.loss) && std::all_of(g.begin(), g.end(), [](double v) {
                            return std::isfinite(v);
                          });
      if (!finite)
        throw TrainingError("non-finite loss or gradient at epoch " + std::to_string(epoch) +
                                "; check the blur and learning rate",
                            epoch);
      epoch_loss += lg.loss * static_cast<double>(end - start);
      adam_step(params, g, adam, adam_cfg);
      maps::unflatten(params, model.map);
    }
    model.loss_history.push_back(epoch_loss / static_cast<double>(total));
  }
  return model;
}

Prediction predict(std::span<const TrainedLocalModel> models, const EmpiricalMeasure& test_source,
                   const ot::SinkhornConfig& cfg) {
  if (models.empty()) throw ValidationError("predict: no models given");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < models.size(); ++m) {
    if (models[m].reference.dim() != test_source.dim()) throw DimensionError("predict: dimension mismatch");
    const double d = w2_distance(models[m].reference, test_source, cfg);
    if (d < best_d) {
      best_d = d;
      best = m;
    }
  }
  return {maps::pushforward(models[best].map, test_source), best, best_d};
}

std::vector<std::size_t> greedy_references(const RegressionDataset& data, std::size_t m,
                                           const ot::SinkhornConfig& cfg) {
  if (m == 0 || m > data.size())
    throw ValidationError("greedy references: need 1 <= M <= n (M=" + std::to_string(m) +
                          ", n=" + std::to_string(data.size()) + ")");
  std::vector<std::size_t> chosen{0};
  std::vector<double> mind(data.size(), std::numeric_limits<double>::infinity());
  while (chosen.size() < m) {
    const auto& last = data[chosen.back()].source;
    for (std::size_t i = 0; i < data.size(); ++i) mind[i] = std::min(mind[i], w2_distance(last, data[i].source, cfg));
    std::size_t next = 0;
    double far = -1.0;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (mind[i] > far) {
        far = mind[i];
        next = i;
      }
    chosen.push_back(next);
  }
  return chosen;
}

}  // namespace wassreg::train

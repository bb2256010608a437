#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace wassreg {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
};

// One bias-corrected Adam update in place. An empty state is sized on first
// use; afterwards params, grads and state must agree in length
// (DimensionError otherwise).
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& cfg);

}  // namespace wassreg

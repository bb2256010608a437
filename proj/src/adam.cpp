#include "wassreg/adam.hpp"

#include <cmath>

#include "wassreg/errors.hpp"

namespace wassreg {

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValidationError("adam: learning rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ValidationError("adam: betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ValidationError("adam: epsilon must be > 0");
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw DimensionError("adam_step: parameter and gradient sizes differ");
  if (state.m.empty() && state.v.empty() && state.step == 0) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw DimensionError("adam_step: optimiser state has the wrong size");

  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

}  // namespace wassreg

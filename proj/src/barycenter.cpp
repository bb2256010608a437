#include <algorithm>
#include <cmath>

#include "wassreg/errors.hpp"
#include "wassreg/ot.hpp"

namespace wassreg::ot {

namespace {

Matrix initial_support(const EmpiricalMeasure& first, std::size_t support_size) {
  const std::size_t k = first.size();
  Matrix out(support_size, first.dim());
  for (std::size_t j = 0; j < support_size; ++j) {
    // Evenly spaced rows when subsampling, cyclic repeat when padding.
    const std::size_t src = support_size <= k ? (j * k) / support_size : j % k;
    const auto row = first.point(src);
    std::copy(row.begin(), row.end(), out.row(j).begin());
  }
  return out;
}

}  // namespace

BarycenterResult free_support_barycenter_trace(std::span<const EmpiricalMeasure> measures, std::size_t support_size,
                                               const SinkhornConfig& cfg, int max_outer) {
  if (measures.empty()) throw DimensionError("barycenter: empty input list");
  if (support_size == 0) throw DimensionError("barycenter: support_size must be >= 1");
  if (max_outer < 0) throw ValidationError("barycenter: max_outer must be >= 0");
  const std::size_t d = measures.front().dim();
  for (const auto& m : measures)
    if (m.dim() != d) throw DimensionError("barycenter: inputs have different dimensions");

  const double inv_n = 1.0 / static_cast<double>(measures.size());
  BarycenterResult res{make_uniform_measure(initial_support(measures.front(), support_size)), {}, 0, false};

  // Potentials of each input's plan seed the next outer step.
  std::vector<WarmStart> warm(measures.size());
  for (int outer = 0;; ++outer) {
    Matrix next(support_size, d);
    double objective = 0.0;
    for (std::size_t m = 0; m < measures.size(); ++m) {
      const auto& nu = measures[m];
      EntropicPlan plan = entropic_plan(res.measure, nu, cfg, &warm[m]);
      warm[m] = std::move(plan.potentials);
      objective += plan.value;
      for (std::size_t j = 0; j < support_size; ++j) {
        const auto pi = plan.conditional.row(j);
        for (std::size_t l = 0; l < nu.size(); ++l) {
          const double w = pi[l] * inv_n;
          if (w == 0.0) continue;
          for (std::size_t c = 0; c < d; ++c) next(j, c) += w * nu.points()(l, c);
        }
      }
    }
    res.objective.push_back(objective);
    if (outer == max_outer) break;

    double moved = 0.0;
    for (std::size_t j = 0; j < support_size; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double t = next(j, c) - res.measure.points()(j, c);
        s += t * t;
      }
      moved = std::max(moved, std::sqrt(s));
    }
    res.measure = make_uniform_measure(std::move(next));
    res.outer_iters = outer + 1;
    if (moved < 1e-6) {
      res.converged = true;
      // Objective at the final support, so the history ends where we stop.
      double final_obj = 0.0;
      for (std::size_t m = 0; m < measures.size(); ++m)
        final_obj += entropic_plan(res.measure, measures[m], cfg, &warm[m]).value;
      res.objective.push_back(final_obj);
      break;
    }
  }
  return res;
}

EmpiricalMeasure free_support_barycenter(std::span<const EmpiricalMeasure> measures, std::size_t support_size,
                                         const SinkhornConfig& cfg, int max_outer) {
  return free_support_barycenter_trace(measures, support_size, cfg, max_outer).measure;
}

}  // namespace wassreg::ot

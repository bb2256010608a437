#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "wassreg/matrix.hpp"
#include "wassreg/measures.hpp"

namespace wassreg::ot {

// How `blur` maps to the entropic temperature that multiplies
// KL(pi | a (x) b) next to the squared-Euclidean cost.
//   temperature:  eps = blur          (default)
//   length_scale: eps = blur^2        (blur read as a length)
enum class BlurConvention { temperature, length_scale };

struct SinkhornConfig {
  double blur = 0.15;
  BlurConvention convention = BlurConvention::temperature;
  int max_iters = 2000;
  // Stop once the sup-norm change of every dual potential in one update
  // drops below tol.
  double tol = 1e-9;
  bool debiased = true;
  // Trailing updates differentiated through by sinkhorn_grad_points.
  int unroll_iters = 50;
  // Temperature annealing: start at diameter^2 and multiply by `scaling`
  // each update until the target temperature is reached.
  double scaling = 0.5;

  double epsilon() const { return convention == BlurConvention::temperature ? blur : blur * blur; }
  // Throws ValidationError unless blur > 0, tol > 0, 0 < scaling < 1 and
  // 1 <= unroll_iters <= max_iters.
  void validate() const;
};

struct OtResult {
  // S_eps(a, b) when debiased, OT_eps(a, b) otherwise.
  double value = 0.0;
  // Dual potentials of the cross problem, on the support of a and b.
  std::vector<double> potential_a;
  std::vector<double> potential_b;
  // Potential of the a-against-a problem (debiased runs only).
  std::vector<double> potential_self_a;
  bool converged = false;
  // Largest number of potential updates used by any of the sub-problems.
  int iters_used = 0;
};

// Entropic OT value of b against itself, OT_eps(b, b). Training caches this
// for fixed targets; it does not depend on the pushed-forward source.
struct SelfTerm {
  double value = 0.0;
  bool converged = false;
  int iters_used = 0;
};
SelfTerm self_transport(const EmpiricalMeasure& b, const SinkhornConfig& cfg);

// Debiased Sinkhorn divergence
//   S_eps(a,b) = OT_eps(a,b) - OT_eps(a,a)/2 - OT_eps(b,b)/2
// (or OT_eps(a,b) alone when cfg.debiased is false), computed with
// log-domain symmetric Sinkhorn updates and temperature annealing.
// Never throws on slow convergence: the result carries converged=false.
OtResult sinkhorn_divergence(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                             const SinkhornConfig& cfg);

// Potentials of an earlier solve with the same support sizes, e.g. the
// previous optimisation step on the same pair. A warm-started run skips the
// temperature annealing and starts at the target temperature; the starting
// potentials are treated as constants when differentiating. A warm run whose
// update size is still above 1000 * tol after max(100, max_iters / 10)
// updates, or that has not converged by max_iters, is discarded and the
// problem is solved cold. Entries whose length does not match are ignored
// (cold start for that sub-problem).
struct WarmStart {
  std::vector<double> f;       // potential_a
  std::vector<double> g;       // potential_b
  std::vector<double> self_a;  // potential_self_a
};

struct ValueAndGrad {
  OtResult result;
  Matrix grad;  // d value / d (points of a), k_a x d
};

// Value together with its gradient with respect to the support points of
// `a_pushed`, obtained by reverse-mode differentiation through the last
// cfg.unroll_iters updates (potentials older than that are held constant;
// when the whole run fits in the window the gradient is exact for the
// computed value). `b_self` may carry a cached self_transport(b, cfg).
ValueAndGrad sinkhorn_value_and_grad(const EmpiricalMeasure& a_pushed, const EmpiricalMeasure& b,
                                     const SinkhornConfig& cfg,
                                     const std::optional<SelfTerm>& b_self = std::nullopt,
                                     const WarmStart* warm = nullptr);

Matrix sinkhorn_grad_points(const EmpiricalMeasure& a_pushed, const EmpiricalMeasure& b,
                            const SinkhornConfig& cfg);

// Row-normalised entropic plan between a and b: row i holds pi(j | i), the
// conditional distribution of the coupling given source point i.
struct EntropicPlan {
  Matrix conditional;  // k_a x k_b
  double value = 0.0;  // OT_eps(a, b), dual objective at the final potentials
  bool converged = false;
  WarmStart potentials;  // f and g of the final state
};
EntropicPlan entropic_plan(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                           const SinkhornConfig& cfg, const WarmStart* warm = nullptr);

// ----------------------------------------------------------------------------
// Exact solvers.

// Largest k_a * k_b accepted by exact_w2_squared.
inline constexpr std::size_t kExactSizeLimit = 1'000'000;

// Squared 2-Wasserstein distance solved exactly: an assignment problem when
// both measures are uniform with equal support size, a min-cost transport
// flow otherwise. Throws CapacityError above kExactSizeLimit.
double exact_w2_squared(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

// Minimum-cost perfect assignment on a square cost matrix (row-major n x n).
// Returns col_for_row.
std::vector<std::size_t> solve_assignment(const Matrix& cost);

// Min-cost transport between supplies a and demands b (equal totals) under
// `cost`. Returns the optimal plan (k_a x k_b).
Matrix solve_transport(std::span<const double> a, std::span<const double> b, const Matrix& cost);

// Squared-Euclidean cost matrix between the supports.
Matrix squared_distances(const Matrix& x, const Matrix& y);

// ----------------------------------------------------------------------------
// Barycenters.

struct BarycenterResult {
  EmpiricalMeasure measure;
  // Sum over inputs of OT_eps(support, nu_i) before each support update and
  // after the last one; non-increasing up to Sinkhorn convergence error.
  std::vector<double> objective;
  int outer_iters = 0;
  bool converged = false;
};

// Free-support barycenter by fixed-point iteration: the support starts from
// the first measure (evenly subsampled, or cycled when support_size exceeds
// it); each step moves every support point to the average over inputs of its
// entropic-plan barycentric projection. Stops when no point moves more than
// 1e-6 or after max_outer steps. Output weights are uniform.
BarycenterResult free_support_barycenter_trace(std::span<const EmpiricalMeasure> measures,
                                               std::size_t support_size, const SinkhornConfig& cfg,
                                               int max_outer);

EmpiricalMeasure free_support_barycenter(std::span<const EmpiricalMeasure> measures,
                                         std::size_t support_size, const SinkhornConfig& cfg,
                                         int max_outer);

}  // namespace wassreg::ot

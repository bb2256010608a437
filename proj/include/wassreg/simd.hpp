#pragma once

#include <cstddef>
#include <string_view>

// Inner loops of the entropic transport solver. Every kernel works on one
// row of an implicit (source x target) cost matrix; target points are passed
// coordinate-major ("qt": d arrays of length m laid out back to back) so the
// target index is the contiguous, vectorised one.
//
// The scalar table is the reference. Other tables must agree with it to a
// few ulps per element (see tests/test_simd.cpp); reductions may associate
// differently.
namespace wassreg::simd {

struct KernelTable {
  const char* name;

  // out[j] = bias[j] - scale * ||p - q_j||^2 for j < m; returns max_j out[j].
  double (*neg_cost_logits)(const double* p, const double* qt, std::size_t m, std::size_t d,
                            const double* bias, double scale, double* out);

  // v[j] <- exp(v[j] - shift); returns the sum of the new v.
  double (*exp_shift_sum)(double* v, std::size_t m, double shift);

  double (*dot)(const double* x, const double* y, std::size_t m);

  // y[j] += alpha * x[j]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t m);

  // y[j] += alpha * x[j] * (q[j] - c)
  void (*axpy_shifted)(double alpha, const double* x, const double* q, double c, double* y,
                       std::size_t m);
};

const KernelTable& scalar_kernels();

// nullptr when the build has no AVX2 translation unit.
const KernelTable* avx2_kernels();

// True when AVX2 kernels are compiled in and the CPU supports AVX2+FMA.
bool avx2_available();

// Table used by the solver. Chosen on first use: AVX2 when available,
// scalar otherwise; the WASSREG_SIMD environment variable ("scalar",
// "avx2", "auto") overrides the choice.
const KernelTable& active();

// Programmatic override with the same vocabulary as WASSREG_SIMD. Throws
// ValidationError for unknown names or unavailable instruction sets.
void select(std::string_view name);

}  // namespace wassreg::simd

#include <cmath>

#include "wassreg/simd.hpp"

namespace wassreg::simd {

namespace {

double neg_cost_logits(const double* p, const double* qt, std::size_t m, std::size_t d,
                       const double* bias, double scale, double* out) {
  double best = -INFINITY;
  for (std::size_t j = 0; j < m; ++j) {
    double c = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double t = p[k] - qt[k * m + j];
      c += t * t;
    }
    out[j] = bias[j] - scale * c;
    if (out[j] > best) best = out[j];
  }
  return best;
}

double exp_shift_sum(double* v, std::size_t m, double shift) {
  double s = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    v[j] = std::exp(v[j] - shift);
    s += v[j];
  }
  return s;
}

double dot(const double* x, const double* y, std::size_t m) {
  double s = 0.0;
  for (std::size_t j = 0; j < m; ++j) s += x[j] * y[j];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t m) {
  for (std::size_t j = 0; j < m; ++j) y[j] += alpha * x[j];
}

void axpy_shifted(double alpha, const double* x, const double* q, double c, double* y, std::size_t m) {
  for (std::size_t j = 0; j < m; ++j) y[j] += alpha * x[j] * (q[j] - c);
}

constexpr KernelTable kScalar{"scalar", neg_cost_logits, exp_shift_sum, dot, axpy, axpy_shifted};

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

}  // namespace wassreg::simd

// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include <cmath>

#include "wassreg/simd.hpp"

namespace wassreg::simd {

namespace {

// exp(x) for four doubles. Cody-Waite reduction x = n*ln2 + r with
// |r| <= ln2/2, degree-13 Taylor polynomial for exp(r), then scaling by 2^n
// through the exponent bits. Inputs below -708 flush to zero; the solver only
// feeds non-positive arguments, where this stays within ~2 ulp of std::exp.
inline __m256d exp_pd(__m256d x) {
  const __m256d lo = _mm256_set1_pd(-708.0);
  const __m256d hi = _mm256_set1_pd(709.0);
  const __m256d xc = _mm256_min_pd(_mm256_max_pd(x, lo), hi);
  const __m256d n =
      _mm256_round_pd(_mm256_mul_pd(xc, _mm256_set1_pd(1.4426950408889634)), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(6.93145751953125e-1), xc);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.42860682030941723212e-6), r);

  __m256d poly = _mm256_set1_pd(1.0 / 6227020800.0);  // 1/13!
  poly = _mm256_fmadd_pd(poly, r, _mm256_set1_pd(1.0 / 479001600.0));
  poly = _mm256_fmadd_pd(poly, r, _mm256_set1_pd(1.0 / 39916800.0));
  poly = _mm256_fmadd_pd(poly, r, _mm256_set1_pd(1.0 / 3628800.0));
  poly = _mm256_fmadd_pd(poly, r, _mm256_set1_pd(1.0 / 362880.0));
  poly = _mm256_fmadd_pd(poly, r, _mm256_set1_pd(1.0 / 40320.0));
  poly = _mm256_fmadd_pd(poly, r, _mm256_set1_pd(1.0 / 5040.0));
  poly = _mm256_fmadd_pd(poly, r, _mm256_set1_pd(1.0 / 720.0));
  poly = _mm256_fmadd_pd(poly, r, _mm256_set1_pd(1.0 / 120.0));
  poly = _mm256_fmadd_pd(poly, r, _mm256_set1_pd(1.0 / 24.0));
  poly = _mm256_fmadd_pd(poly, r, _mm256_set1_pd(1.0 / 6.0));
  poly = _mm256_fmadd_pd(poly, r, _mm256_set1_pd(0.5));
  poly = _mm256_fmadd_pd(poly, r, _mm256_set1_pd(1.0));
  poly = _mm256_fmadd_pd(poly, r, _mm256_set1_pd(1.0));

  const __m128i n32 = _mm256_cvtpd_epi32(n);
  const __m256i n64 = _mm256_cvtepi32_epi64(n32);
  const __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(n64, _mm256_set1_epi64x(1023)), 52);
  const __m256d result = _mm256_mul_pd(poly, _mm256_castsi256_pd(bits));
  const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  return _mm256_andnot_pd(underflow, result);
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline double hmax(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_max_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_max_sd(s, _mm_unpackhi_pd(s, s)));
}

double neg_cost_logits(const double* p, const double* qt, std::size_t m, std::size_t d,
                       const double* bias, double scale, double* out) {
  const __m256d vscale = _mm256_set1_pd(scale);
  __m256d vmax = _mm256_set1_pd(-INFINITY);
  std::size_t j = 0;
  for (; j + 4 <= m; j += 4) {
    __m256d c = _mm256_setzero_pd();
    for (std::size_t k = 0; k < d; ++k) {
      const __m256d t = _mm256_sub_pd(_mm256_set1_pd(p[k]), _mm256_loadu_pd(qt + k * m + j));
      c = _mm256_fmadd_pd(t, t, c);
    }
    const __m256d v = _mm256_fnmadd_pd(vscale, c, _mm256_loadu_pd(bias + j));
    _mm256_storeu_pd(out + j, v);
    vmax = _mm256_max_pd(vmax, v);
  }
  double best = hmax(vmax);
  for (; j < m; ++j) {
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
  const __m256d vshift = _mm256_set1_pd(shift);
  __m256d acc = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 4 <= m; j += 4) {
    const __m256d e = exp_pd(_mm256_sub_pd(_mm256_loadu_pd(v + j), vshift));
    _mm256_storeu_pd(v + j, e);
    acc = _mm256_add_pd(acc, e);
  }
  double s = hsum(acc);
  for (; j < m; ++j) {
    v[j] = std::exp(v[j] - shift);
    s += v[j];
  }
  return s;
}

double dot(const double* x, const double* y, std::size_t m) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 4 <= m; j += 4) acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + j), _mm256_loadu_pd(y + j), acc);
  double s = hsum(acc);
  for (; j < m; ++j) s += x[j] * y[j];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t m) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t j = 0;
  for (; j + 4 <= m; j += 4)
    _mm256_storeu_pd(y + j, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + j), _mm256_loadu_pd(y + j)));
  for (; j < m; ++j) y[j] += alpha * x[j];
}

void axpy_shifted(double alpha, const double* x, const double* q, double c, double* y, std::size_t m) {
  const __m256d a = _mm256_set1_pd(alpha);
  const __m256d vc = _mm256_set1_pd(c);
  std::size_t j = 0;
  for (; j + 4 <= m; j += 4) {
    const __m256d ax = _mm256_mul_pd(a, _mm256_loadu_pd(x + j));
    const __m256d diff = _mm256_sub_pd(_mm256_loadu_pd(q + j), vc);
    _mm256_storeu_pd(y + j, _mm256_fmadd_pd(ax, diff, _mm256_loadu_pd(y + j)));
  }
  for (; j < m; ++j) y[j] += alpha * x[j] * (q[j] - c);
}

constexpr KernelTable kAvx2{"avx2", neg_cost_logits, exp_shift_sum, dot, axpy, axpy_shifted};

}  // namespace

const KernelTable* avx2_kernels_impl() { return &kAvx2; }

}  // namespace wassreg::simd

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace wassreg {

// Portable seeded generator: std::mt19937_64 (fully specified by the C++
// standard) with distribution code written here, since the standard library
// distributions are implementation-defined. Streams for sub-tasks (pair i,
// repetition r, ...) are derived with derive_seed so that work can be
// generated in any order or in parallel with identical results.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal by Box-Muller; the second variate is cached.
  double normal();
  double exponential();
  // Uniform integer in [0, n); n >= 1. Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n);
  // Index drawn with probability proportional to probs (inverse CDF).
  std::size_t categorical(std::span<const double> probs);
  // Dirichlet(1, ..., 1) in `n` categories, via normalised exponentials.
  std::vector<double> dirichlet_ones(std::size_t n);
  // Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }
  // `m` distinct indices out of [0, n) in increasing order.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t m);

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

// splitmix64 finaliser applied to (seed, stream): independent child seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace wassreg

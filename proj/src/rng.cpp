#include "wassreg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "wassreg/errors.hpp"

namespace wassreg {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  double u1 = uniform();
  while (u1 == 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * std::numbers::pi * u2;
  cached_normal_ = r * std::sin(t);
  has_cached_ = true;
  return r * std::cos(t);
}

double Rng::exponential() {
  double u = uniform();
  while (u == 0.0) u = uniform();
  return -std::log(u);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ValidationError("Rng::below: n must be >= 1");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

std::size_t Rng::categorical(std::span<const double> probs) {
  if (probs.empty()) throw ValidationError("Rng::categorical: empty distribution");
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  const double u = uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // Rounding can leave u just above the running sum; fall back to the last
  // category with positive mass.
  for (std::size_t i = probs.size(); i-- > 0;)
    if (probs[i] > 0.0) return i;
  return probs.size() - 1;
}

std::vector<double> Rng::dirichlet_ones(std::size_t n) {
  std::vector<double> w(n);
  double s = 0.0;
  for (auto& x : w) s += (x = exponential());
  for (auto& x : w) x /= s;
  return w;
}

std::vector<std::size_t> Rng::sample_indices(std::size_t n, std::size_t m) {
  if (m > n) throw ValidationError("Rng::sample_indices: cannot draw more indices than available");
  // Partial Fisher-Yates over an index array.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < m; ++i) std::swap(idx[i], idx[i + below(n - i)]);
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace wassreg

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "wassreg/matrix.hpp"
#include "wassreg/measures.hpp"

namespace wassreg::datagen {

// Pairs of planar Gaussian clouds related by a rotation about the origin
// that depends on the cloud's mean:
//   m ~ U([lo, hi]^2), x_j ~ N(m, I), theta = 2|m|, a = m / 2,
//   y_j = R(theta) x_j + a + eps, eps ~ N(0, sigma^2 I) drawn once per pair.
struct GaussianGenConfig {
  std::size_t n = 100;
  std::size_t k = 100;
  double mean_low = -3.0;
  double mean_high = 3.0;
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

// Gaussian-mixture sources mapped by a radius-dependent blend of rotation
// and shear:
//   w ~ Dirichlet(1_C), means ~ U([L, U]^d), x_l ~ N(mean_{c_l}, sigma^2 I)
//   with c_l ~ Categorical(w); r = RMS norm of the cloud, m_bar its mean;
//   A(r) = lambda R(alpha r) + (1 - lambda) S(kappa0 + kappa1 r),
//   lambda = logistic((r_thresh - r) / gamma);
//   y_l = A(r) x_l + beta m_bar + eps_l, eps_l ~ N(0, tau^2 I).
// For dim > 2 the blend acts on the first two coordinates and the identity
// on the rest; means, noise, r and m_bar use every coordinate.
struct GmmGenConfig {
  std::size_t n = 100;
  std::size_t k = 100;
  std::size_t dim = 2;
  std::size_t components = 3;
  double mean_low = -3.0;
  double mean_high = 3.0;
  double component_sigma = 0.5;
  double alpha_rot = 0.3;
  double kappa0 = 0.2;
  double kappa1 = 0.05;
  // Unset: median r over kPilotSize sources drawn from a derived stream.
  std::optional<double> r_thresh;
  double gamma = 0.5;
  double beta = 0.5;
  double tau = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

inline constexpr std::size_t kPilotSize = 256;

// Random streams: pair i draws from Rng(derive_seed(seed, i)). Gaussian
// pairs draw m (2 uniforms), then x row by row, then eps. GMM pairs draw
// w, the means row by row, then per point its component and coordinates,
// then per point the target noise.
RegressionDataset gen_gaussian_pairs(const GaussianGenConfig& cfg);
RegressionDataset gen_gmm_pairs(const GmmGenConfig& cfg);

// Pair i of gen_gaussian_pairs, optionally with the mean forced to `mean`
// (the stream is consumed identically either way).
MeasurePair gaussian_pair(const GaussianGenConfig& cfg, std::uint64_t index,
                          std::optional<std::array<double, 2>> mean = std::nullopt);

struct AffineTruth {
  Matrix A;
  std::vector<double> a;
  double theta = 0.0;   // rotation angle actually used
  double lambda = 0.0;  // blend weight (1 for the Gaussian family)
};

// The Gaussian family's ground truth at mean m.
AffineTruth gaussian_truth(std::span<const double> m);

// A(r) for the GMM family, d x d; `r_thresh` must be resolved.
AffineTruth gmm_truth(double r, std::span<const double> m_bar, const GmmGenConfig& cfg, double r_thresh);

// Threshold gen_gmm_pairs will use for cfg.
double resolve_r_thresh(const GmmGenConfig& cfg);

// Deterministic subset: n pairs (ids preserved, master order) and k support
// points per measure drawn without replacement. When a pair's source and
// target have the same size, the same point indices are used for both so
// that point correspondences survive. Weights are renormalised.
RegressionDataset subsample_regime(const RegressionDataset& master, std::size_t n, std::size_t k,
                                   std::uint64_t subset_seed);

}  // namespace wassreg::datagen

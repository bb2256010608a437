#pragma once

#include <span>

namespace wassreg::kernel {

enum class Family { gaussian, epanechnikov };

// K_h(dist) = h^{-d} K(dist / h).
struct KernelSpec {
  Family family = Family::gaussian;
  double bandwidth = 1.0;
  int ambient_dim = 2;

  void validate() const;
};

// k-th nearest neighbour rule: h = scale * (k-th smallest distance).
struct BandwidthRule {
  int neighbors = 1;
  double scale = 1.0;

  void validate() const;
};

// Smallest bandwidth select_bandwidth returns: 1e-6 * (1 + largest distance).
double bandwidth_floor(std::span<const double> dists);

// Gaussian K(u) = (2 pi)^{-1/2} exp(-u^2/2); Epanechnikov K(u) = 3/4 (1-u^2)_+.
// Throws ValidationError for negative or non-finite distances.
double kernel_weight(double dist, const KernelSpec& spec);

// scale * (k-th order statistic of dists), never below bandwidth_floor.
// Throws ValidationError when fewer than k distances are given or a
// distance is negative or non-finite.
double select_bandwidth(std::span<const double> dists, const BandwidthRule& rule);

const char* family_name(Family f);
Family parse_family(const char* name);

}  // namespace wassreg::kernel

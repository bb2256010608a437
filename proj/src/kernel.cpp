#include "wassreg/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "wassreg/errors.hpp"

namespace wassreg::kernel {

void KernelSpec::validate() const {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw ValidationError("kernel: bandwidth must be > 0");
  if (ambient_dim < 1) throw ValidationError("kernel: ambient dimension must be >= 1");
}

void BandwidthRule::validate() const {
  if (neighbors < 1) throw ValidationError("bandwidth rule: neighbors must be >= 1");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ValidationError("bandwidth rule: scale must be > 0");
}

double kernel_weight(double dist, const KernelSpec& spec) {
  spec.validate();
  if (!(dist >= 0.0) || !std::isfinite(dist)) throw ValidationError("kernel: distance must be finite and >= 0");
  const double u = dist / spec.bandwidth;
  double k = 0.0;
  switch (spec.family) {
    case Family::gaussian:
      k = std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
      break;
    case Family::epanechnikov:
      k = u < 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
      break;
  }
  return std::pow(spec.bandwidth, -spec.ambient_dim) * k;
}

double bandwidth_floor(std::span<const double> dists) {
  double hi = 0.0;
  for (double d : dists) hi = std::max(hi, d);
  return 1e-6 * (1.0 + hi);
}

double select_bandwidth(std::span<const double> dists, const BandwidthRule& rule) {
  rule.validate();
  const auto k = static_cast<std::size_t>(rule.neighbors);
  if (dists.size() < k)
    throw ValidationError("bandwidth rule needs " + std::to_string(k) + " distances, got " +
                          std::to_string(dists.size()));
  for (double d : dists)
    if (!(d >= 0.0) || !std::isfinite(d)) throw ValidationError("bandwidth rule: distances must be finite and >= 0");
  std::vector<double> sorted(dists.begin(), dists.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
  return std::max(rule.scale * sorted[k - 1], bandwidth_floor(dists));
}

const char* family_name(Family f) { return f == Family::gaussian ? "gaussian" : "epanechnikov"; }

Family parse_family(const char* name) {
  const std::string s(name);
  if (s == "gaussian") return Family::gaussian;
  if (s == "epanechnikov") return Family::epanechnikov;
  throw ValidationError("unknown kernel family '" + s + "'");
}

}  // namespace wassreg::kernel

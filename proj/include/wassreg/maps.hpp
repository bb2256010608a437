#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "wassreg/matrix.hpp"
#include "wassreg/measures.hpp"

namespace wassreg::maps {

// T(x) = alpha + B x.
struct AffineMap {
  std::vector<double> alpha;  // d
  Matrix B;                   // d x d

  static AffineMap identity(std::size_t d);
  std::size_t dim() const { return alpha.size(); }
  friend bool operator==(const AffineMap&, const AffineMap&) = default;
};

// Fully connected layer y = W x + b with W stored (out x in).
struct Dense {
  Matrix weight;
  std::vector<double> bias;

  std::size_t in() const { return weight.cols(); }
  std::size_t out() const { return weight.rows(); }
  friend bool operator==(const Dense&, const Dense&) = default;
};

struct LayerSizes {
  std::size_t encoder = 64;  // h_enc
  std::size_t context = 32;  // h_ctx
  std::size_t head = 64;     // h_head
};

// Displacement map T(x) = x + head([x; z]) with context
// z = decoder(sum_j w_j psi(x_j)), psi = relu(enc2(relu(enc1(x)))),
// head = head2(relu(head1(.))). The decoder is a single linear layer.
struct DeepSetsParams {
  Dense enc1, enc2, decoder, head1, head2;

  std::size_t dim() const { return enc1.in(); }
  LayerSizes sizes() const { return {enc1.out(), decoder.out(), head1.out()}; }
  friend bool operator==(const DeepSetsParams&, const DeepSetsParams&) = default;
};

using TransportMapParams = std::variant<AffineMap, DeepSetsParams>;

enum class Family { affine, displacement };

Family family_of(const TransportMapParams& p);
const char* family_name(Family f);
Family parse_family(std::string_view name);
std::size_t map_dim(const TransportMapParams& p);

// Encoder and decoder weights are drawn uniform on +-1/sqrt(fan_in) with
// zero biases; head1 likewise; head2 (the output layer) is all zeros so the
// map starts at the identity.
DeepSetsParams init_deepsets(std::size_t d, const LayerSizes& sizes, std::uint64_t seed);
TransportMapParams init_map(Family family, std::size_t d, const LayerSizes& sizes, std::uint64_t seed);

// Throws ValidationError on non-finite entries and DimensionError when the
// layer shapes do not chain.
void validate(const TransportMapParams& p);

std::vector<double> deepsets_encode(const EmpiricalMeasure& source, const DeepSetsParams& params);

// Affine ignores z; displacement requires it (ValidationError otherwise).
std::vector<double> apply_map(const TransportMapParams& params, std::span<const double> x,
                              std::optional<std::span<const double>> z = std::nullopt);

// Maps every support point; weights are kept. The displacement context is
// computed from `source` itself.
EmpiricalMeasure pushforward(const TransportMapParams& params, const EmpiricalMeasure& source);

// Vector-Jacobian product of pushforward: given dL/d(pushed points) returns
// dL/d(params) with the same layout as `params`, optionally accumulating
// into `grad_accum` (which must share the layout) instead.
TransportMapParams pushforward_vjp(const TransportMapParams& params, const EmpiricalMeasure& source,
                                   const Matrix& point_grad);
void pushforward_vjp_accumulate(const TransportMapParams& params, const EmpiricalMeasure& source,
                                const Matrix& point_grad, TransportMapParams& grad_accum);

// Fixed parameter ordering used by the optimiser and finite-difference
// checks: alpha, B for affine; enc1, enc2, decoder, head1, head2 (weight
// then bias) for displacement.
std::size_t parameter_count(const TransportMapParams& p);
std::vector<double> flatten(const TransportMapParams& p);
void unflatten(std::span<const double> values, TransportMapParams& p);
// Same layout as p, all zeros.
TransportMapParams zeros_like(const TransportMapParams& p);

// JSON encoding: {"family": ..., "dim": d, "layers"/"alpha"/"B": ...} with
// row-major weight arrays and explicit shapes.
std::string map_to_json(const TransportMapParams& p);
TransportMapParams map_from_json(std::string_view text);

}  // namespace wassreg::maps

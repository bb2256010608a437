#include "wassreg/maps.hpp"

#include <cmath>
#include <string>

#include "map_json.hpp"
#include "wassreg/autodiff.hpp"
#include "wassreg/errors.hpp"
#include "wassreg/rng.hpp"

namespace wassreg::maps {

namespace {

template <class... F>
struct Overload : F... {
  using F::operator()...;
};

struct DenseIds {
  ad::Tape::Id w, b;
};

DenseIds leaves(ad::Tape& t, const Dense& l) { return {t.input(l.weight), t.input(l.bias)}; }

ad::Tape::Id apply(ad::Tape& t, ad::Tape::Id x, DenseIds l) { return t.linear(x, l.w, l.b); }

// Forward graph of the pushforward; leaf ids in flatten() order.
struct Graph {
  ad::Tape tape;
  std::vector<DenseIds> layers;  // affine: one pseudo-layer (B, alpha)
  ad::Tape::Id out = 0;
  ad::Tape::Id context = 0;
};

Graph build(const TransportMapParams& params, const EmpiricalMeasure& source) {
  if (source.dim() != map_dim(params))
    throw DimensionError("map expects dimension " + std::to_string(map_dim(params)) + ", measure has " +
                         std::to_string(source.dim()));
  Graph g;
  auto& t = g.tape;
  const auto x = t.input(source.points());
  std::visit(Overload{
                 [&](const AffineMap& m) {
                   const DenseIds l{t.input(m.B), t.input(m.alpha)};
                   g.layers = {l};
                   g.out = apply(t, x, l);
                 },
                 [&](const DeepSetsParams& p) {
                   g.layers = {leaves(t, p.enc1), leaves(t, p.enc2), leaves(t, p.decoder), leaves(t, p.head1),
                               leaves(t, p.head2)};
                   const auto h1 = t.relu(apply(t, x, g.layers[0]));
                   const auto h2 = t.relu(apply(t, h1, g.layers[1]));
                   const auto pooled = t.weighted_pool(h2, source.weights());
                   g.context = apply(t, pooled, g.layers[2]);
                   const auto zrep = t.repeat_rows(g.context, source.size());
                   const auto hh = t.relu(apply(t, t.concat_cols(x, zrep), g.layers[3]));
                   g.out = t.add(x, apply(t, hh, g.layers[4]));
                 },
             },
             params);
  return g;
}

void add_to(Dense& dst, const Matrix& gw, const Matrix& gb) {
  dst.weight += gw;
  for (std::size_t i = 0; i < dst.bias.size(); ++i) dst.bias[i] += gb(0, i);
}

Dense zero_dense(std::size_t out, std::size_t in) { return {Matrix(out, in), std::vector<double>(out, 0.0)}; }

Dense uniform_dense(std::size_t out, std::size_t in, Rng& rng) {
  Dense l = zero_dense(out, in);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (auto& w : l.weight.storage()) w = rng.uniform(-bound, bound);
  return l;
}

template <class F>
void for_each_array(const TransportMapParams& p, F&& f) {
  std::visit(Overload{
                 [&](const AffineMap& m) {
                   f(std::span<const double>(m.alpha));
                   f(std::span<const double>(m.B.storage()));
                 },
                 [&](const DeepSetsParams& d) {
                   for (const Dense* l : {&d.enc1, &d.enc2, &d.decoder, &d.head1, &d.head2}) {
                     f(std::span<const double>(l->weight.storage()));
                     f(std::span<const double>(l->bias));
                   }
                 },
             },
             p);
}

template <class F>
void for_each_array_mut(TransportMapParams& p, F&& f) {
  std::visit(Overload{
                 [&](AffineMap& m) {
                   f(std::span<double>(m.alpha));
                   f(std::span<double>(m.B.storage()));
                 },
                 [&](DeepSetsParams& d) {
                   for (Dense* l : {&d.enc1, &d.enc2, &d.decoder, &d.head1, &d.head2}) {
                     f(std::span<double>(l->weight.storage()));
                     f(std::span<double>(l->bias));
                   }
                 },
             },
             p);
}

void check_dense(const Dense& l, std::size_t out, std::size_t in, const char* name) {
  if (l.weight.rows() != out || l.weight.cols() != in || l.bias.size() != out)
    throw DimensionError(std::string("displacement map: layer '") + name + "' has inconsistent shape");
}

}  // namespace

AffineMap AffineMap::identity(std::size_t d) { return {std::vector<double>(d, 0.0), Matrix::identity(d)}; }

Family family_of(const TransportMapParams& p) {
  return std::holds_alternative<AffineMap>(p) ? Family::affine : Family::displacement;
}

const char* family_name(Family f) { return f == Family::affine ? "affine" : "displacement"; }

Family parse_family(std::string_view name) {
  if (name == "affine") return Family::affine;
  if (name == "displacement") return Family::displacement;
  throw ValidationError("unknown map family '" + std::string(name) + "' (expected affine or displacement)");
}

std::size_t map_dim(const TransportMapParams& p) {
  return std::visit([](const auto& m) { return m.dim(); }, p);
}

DeepSetsParams init_deepsets(std::size_t d, const LayerSizes& s, std::uint64_t seed) {
  if (d == 0 || s.encoder == 0 || s.context == 0 || s.head == 0)
    throw DimensionError("displacement map: dimension and layer sizes must be >= 1");
  Rng rng(seed);
  DeepSetsParams p;
  p.enc1 = uniform_dense(s.encoder, d, rng);
  p.enc2 = uniform_dense(s.encoder, s.encoder, rng);
  p.decoder = uniform_dense(s.context, s.encoder, rng);
  p.head1 = uniform_dense(s.head, d + s.context, rng);
  p.head2 = zero_dense(d, s.head);
  return p;
}

TransportMapParams init_map(Family family, std::size_t d, const LayerSizes& sizes, std::uint64_t seed) {
  if (family == Family::affine) {
    if (d == 0) throw DimensionError("affine map: dimension must be >= 1");
    return AffineMap::identity(d);
  }
  return init_deepsets(d, sizes, seed);
}

void validate(const TransportMapParams& p) {
  std::visit(Overload{
                 [](const AffineMap& m) {
                   if (m.alpha.empty() || m.B.rows() != m.alpha.size() || m.B.cols() != m.alpha.size())
                     throw DimensionError("affine map: alpha and B shapes disagree");
                 },
                 [](const DeepSetsParams& q) {
                   const std::size_t d = q.enc1.in(), e = q.enc1.out(), c = q.decoder.out(), h = q.head1.out();
                   if (d == 0) throw DimensionError("displacement map: zero input dimension");
                   check_dense(q.enc1, e, d, "enc1");
                   check_dense(q.enc2, e, e, "enc2");
                   check_dense(q.decoder, c, e, "decoder");
                   check_dense(q.head1, h, d + c, "head1");
                   check_dense(q.head2, d, h, "head2");
                 },
             },
             p);
  for_each_array(p, [](std::span<const double> a) {
    for (double v : a)
      if (!std::isfinite(v)) throw ValidationError("map parameters contain a non-finite value");
  });
}

std::vector<double> deepsets_encode(const EmpiricalMeasure& source, const DeepSetsParams& params) {
  const TransportMapParams p = params;
  Graph g = build(p, source);
  const Matrix& z = g.tape.value(g.context);
  return {z.data(), z.data() + z.size()};
}

std::vector<double> apply_map(const TransportMapParams& params, std::span<const double> x,
                              std::optional<std::span<const double>> z) {
  const std::size_t d = map_dim(params);
  if (x.size() != d) throw DimensionError("apply_map: point has wrong dimension");
  return std::visit(
      Overload{
          [&](const AffineMap& m) {
            std::vector<double> y(m.alpha);
            for (std::size_t r = 0; r < d; ++r)
              for (std::size_t c = 0; c < d; ++c) y[r] += m.B(r, c) * x[c];
            return y;
          },
          [&](const DeepSetsParams& q) {
            if (!z) throw ValidationError("apply_map: displacement map needs a context vector");
            if (z->size() != q.decoder.out()) throw DimensionError("apply_map: context vector has wrong size");
            std::vector<double> in(x.begin(), x.end());
            in.insert(in.end(), z->begin(), z->end());
            std::vector<double> hidden(q.head1.out());
            for (std::size_t o = 0; o < hidden.size(); ++o) {
              double s = q.head1.bias[o];
              for (std::size_t i = 0; i < in.size(); ++i) s += q.head1.weight(o, i) * in[i];
              hidden[o] = std::max(s, 0.0);
            }
            std::vector<double> y(x.begin(), x.end());
            for (std::size_t o = 0; o < d; ++o) {
              double s = q.head2.bias[o];
              for (std::size_t i = 0; i < hidden.size(); ++i) s += q.head2.weight(o, i) * hidden[i];
              y[o] += s;
            }
            return y;
          },
      },
      params);
}

EmpiricalMeasure pushforward(const TransportMapParams& params, const EmpiricalMeasure& source) {
  Graph g = build(params, source);
  const auto w = source.weights();
  return EmpiricalMeasure(g.tape.value(g.out), std::vector<double>(w.begin(), w.end()));
}

void pushforward_vjp_accumulate(const TransportMapParams& params, const EmpiricalMeasure& source,
                                const Matrix& point_grad, TransportMapParams& grad_accum) {
  if (family_of(grad_accum) != family_of(params)) throw DimensionError("pushforward_vjp: gradient layout mismatch");
  Graph g = build(params, source);
  g.tape.backward(g.out, point_grad);
  const auto& t = g.tape;
  std::visit(Overload{
                 [&](AffineMap& m) {
                   m.B += t.grad(g.layers[0].w);
                   for (std::size_t i = 0; i < m.alpha.size(); ++i) m.alpha[i] += t.grad(g.layers[0].b)(0, i);
                 },
                 [&](DeepSetsParams& q) {
                   Dense* dst[] = {&q.enc1, &q.enc2, &q.decoder, &q.head1, &q.head2};
                   for (std::size_t i = 0; i < 5; ++i) add_to(*dst[i], t.grad(g.layers[i].w), t.grad(g.layers[i].b));
                 },
             },
             grad_accum);
}

TransportMapParams pushforward_vjp(const TransportMapParams& params, const EmpiricalMeasure& source,
                                   const Matrix& point_grad) {
  TransportMapParams out = zeros_like(params);
  pushforward_vjp_accumulate(params, source, point_grad, out);
  return out;
}

std::size_t parameter_count(const TransportMapParams& p) {
  std::size_t n = 0;
  for_each_array(p, [&](std::span<const double> a) { n += a.size(); });
  return n;
}

std::vector<double> flatten(const TransportMapParams& p) {
  std::vector<double> out;
  out.reserve(parameter_count(p));
  for_each_array(p, [&](std::span<const double> a) { out.insert(out.end(), a.begin(), a.end()); });
  return out;
}

void unflatten(std::span<const double> values, TransportMapParams& p) {
  if (values.size() != parameter_count(p)) throw DimensionError("unflatten: parameter count mismatch");
  std::size_t pos = 0;
  for_each_array_mut(p, [&](std::span<double> a) {
    std::copy(values.begin() + static_cast<std::ptrdiff_t>(pos),
              values.begin() + static_cast<std::ptrdiff_t>(pos + a.size()), a.begin());
    pos += a.size();
  });
}

TransportMapParams zeros_like(const TransportMapParams& p) {
  TransportMapParams z = p;
  for_each_array_mut(z, [](std::span<double> a) { std::fill(a.begin(), a.end(), 0.0); });
  return z;
}

std::string map_to_json(const TransportMapParams& p) { return detail::map_to_jvalue(p).dump(1); }

TransportMapParams map_from_json(std::string_view text) { return detail::map_from_jvalue(detail::parse_json_text(text)); }

}  // namespace wassreg::maps

namespace wassreg::detail {

namespace {

json dense_to_json(const maps::Dense& l) { return json{{"weight", matrix_to_json(l.weight)}, {"bias", l.bias}}; }

maps::Dense dense_from_json(const json& j, const char* name) {
  if (!j.is_object()) throw ValidationError(std::string("model: layer '") + name + "' must be an object");
  require_known_keys(j, {"weight", "bias"}, name);
  return {matrix_from_json(j.at("weight")), j.at("bias").get<std::vector<double>>()};
}

constexpr const char* kLayerNames[] = {"enc1", "enc2", "decoder", "head1", "head2"};

}  // namespace

json map_to_jvalue(const maps::TransportMapParams& p) {
  json j;
  j["family"] = maps::family_name(maps::family_of(p));
  j["dim"] = maps::map_dim(p);
  if (const auto* a = std::get_if<maps::AffineMap>(&p)) {
    j["alpha"] = a->alpha;
    j["B"] = matrix_to_json(a->B);
  } else {
    const auto& q = std::get<maps::DeepSetsParams>(p);
    const maps::Dense* layers[] = {&q.enc1, &q.enc2, &q.decoder, &q.head1, &q.head2};
    const auto s = q.sizes();
    j["sizes"] = json{{"encoder", s.encoder}, {"context", s.context}, {"head", s.head}};
    json lj = json::object();
    for (std::size_t i = 0; i < 5; ++i) lj[kLayerNames[i]] = dense_to_json(*layers[i]);
    j["layers"] = std::move(lj);
  }
  return j;
}

maps::TransportMapParams map_from_jvalue(const json& j) {
  if (!j.is_object()) throw ValidationError("map: expected a JSON object");
  try {
    const auto family = maps::parse_family(j.at("family").get<std::string>());
    const auto dim = j.at("dim").get<std::size_t>();
    maps::TransportMapParams p;
    if (family == maps::Family::affine) {
      require_known_keys(j, {"family", "dim", "alpha", "B"}, "affine map");
      p = maps::AffineMap{j.at("alpha").get<std::vector<double>>(), matrix_from_json(j.at("B"))};
    } else {
      require_known_keys(j, {"family", "dim", "sizes", "layers"}, "displacement map");
      const json& lj = j.at("layers");
      require_known_keys(lj, {"enc1", "enc2", "decoder", "head1", "head2"}, "layers");
      maps::DeepSetsParams q;
      maps::Dense* layers[] = {&q.enc1, &q.enc2, &q.decoder, &q.head1, &q.head2};
      for (std::size_t i = 0; i < 5; ++i) *layers[i] = dense_from_json(lj.at(kLayerNames[i]), kLayerNames[i]);
      p = std::move(q);
    }
    maps::validate(p);
    if (maps::map_dim(p) != dim) throw DimensionError("map: 'dim' disagrees with the parameter shapes");
    return p;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("map: ") + e.what());
  }
}

}  // namespace wassreg::detail

#include "wassreg/config.hpp"

#include <fstream>
#include <sstream>
#include <string>
#include <type_traits>

#include "json_util.hpp"
#include "wassreg/errors.hpp"

namespace wassreg::config {

namespace {

// Assigns j[key] to `out` when present, converting type errors into
// ValidationError that names the key.
template <class T>
void take(const json& j, const char* key, T& out, const char* where) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
    const bool ok = std::is_unsigned_v<T> ? it->is_number_unsigned() : it->is_number_integer();
    if (!ok)
      throw ValidationError(std::string(where) + ": key '" + key + "' must be a" +
                            (std::is_unsigned_v<T> ? " non-negative" : "n") + " integer");
  }
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string(where) + ": key '" + key + "' has the wrong type");
  }
}

const char* convention_name(ot::BlurConvention c) {
  return c == ot::BlurConvention::temperature ? "temperature" : "length_scale";
}

ot::BlurConvention parse_convention(const std::string& s) {
  if (s == "temperature") return ot::BlurConvention::temperature;
  if (s == "length_scale") return ot::BlurConvention::length_scale;
  throw ValidationError("sinkhorn: unknown blur convention '" + s + "'");
}

const char* backend_name(eval::Backend b) {
  switch (b) {
    case eval::Backend::exact:
      return "exact";
    case eval::Backend::sinkhorn:
      return "sinkhorn";
    default:
      return "auto";
  }
}

eval::Backend parse_backend(const std::string& s) {
  if (s == "auto") return eval::Backend::automatic;
  if (s == "exact") return eval::Backend::exact;
  if (s == "sinkhorn") return eval::Backend::sinkhorn;
  throw ValidationError("regime: unknown backend '" + s + "'");
}

}  // namespace

json to_json(const ot::SinkhornConfig& c) {
  return json{{"blur", c.blur},     {"convention", convention_name(c.convention)},
              {"max_iters", c.max_iters}, {"tol", c.tol},
              {"debiased", c.debiased}, {"unroll_iters", c.unroll_iters},
              {"scaling", c.scaling}};
}

void apply(const json& j, ot::SinkhornConfig& c) {
  detail::require_known_keys(j, {"blur", "convention", "max_iters", "tol", "debiased", "unroll_iters", "scaling"},
                             "sinkhorn");
  take(j, "blur", c.blur, "sinkhorn");
  take(j, "max_iters", c.max_iters, "sinkhorn");
  take(j, "tol", c.tol, "sinkhorn");
  take(j, "debiased", c.debiased, "sinkhorn");
  take(j, "unroll_iters", c.unroll_iters, "sinkhorn");
  take(j, "scaling", c.scaling, "sinkhorn");
  std::string conv;
  take(j, "convention", conv, "sinkhorn");
  if (!conv.empty()) c.convention = parse_convention(conv);
}

json to_json(const kernel::BandwidthRule& r) { return json{{"neighbors", r.neighbors}, {"scale", r.scale}}; }

void apply(const json& j, kernel::BandwidthRule& r) {
  detail::require_known_keys(j, {"neighbors", "scale"}, "rule");
  take(j, "neighbors", r.neighbors, "rule");
  take(j, "scale", r.scale, "rule");
}

json to_json(const train::TrainConfig& c) {
  return json{{"learning_rate", c.learning_rate},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"sinkhorn", to_json(c.sinkhorn)},
              {"weight_floor", c.weight_floor},
              {"seed", c.seed},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"adam_epsilon", c.adam_epsilon},
              {"kernel", kernel::family_name(c.kernel)},
              {"layers", {{"encoder", c.layers.encoder}, {"context", c.layers.context}, {"head", c.layers.head}}}};
}

void apply(const json& j, train::TrainConfig& c) {
  detail::require_known_keys(j,
                             {"learning_rate", "batch_size", "epochs", "sinkhorn", "weight_floor", "seed", "beta1",
                              "beta2", "adam_epsilon", "kernel", "layers"},
                             "train");
  take(j, "learning_rate", c.learning_rate, "train");
  take(j, "batch_size", c.batch_size, "train");
  take(j, "epochs", c.epochs, "train");
  take(j, "weight_floor", c.weight_floor, "train");
  take(j, "seed", c.seed, "train");
  take(j, "beta1", c.beta1, "train");
  take(j, "beta2", c.beta2, "train");
  take(j, "adam_epsilon", c.adam_epsilon, "train");
  if (j.contains("sinkhorn")) apply(j["sinkhorn"], c.sinkhorn);
  std::string fam;
  take(j, "kernel", fam, "train");
  if (!fam.empty()) c.kernel = kernel::parse_family(fam.c_str());
  if (j.contains("layers")) {
    const json& l = j["layers"];
    detail::require_known_keys(l, {"encoder", "context", "head"}, "train.layers");
    take(l, "encoder", c.layers.encoder, "train.layers");
    take(l, "context", c.layers.context, "train.layers");
    take(l, "head", c.layers.head, "train.layers");
  }
}

json to_json(const datagen::GaussianGenConfig& c) {
  return json{{"n", c.n},       {"k", c.k}, {"mean_low", c.mean_low}, {"mean_high", c.mean_high},
              {"sigma", c.noise_sigma}, {"seed", c.seed}};
}

void apply(const json& j, datagen::GaussianGenConfig& c) {
  detail::require_known_keys(j, {"n", "k", "mean_low", "mean_high", "sigma", "seed"}, "gauss");
  take(j, "n", c.n, "gauss");
  take(j, "k", c.k, "gauss");
  take(j, "mean_low", c.mean_low, "gauss");
  take(j, "mean_high", c.mean_high, "gauss");
  take(j, "sigma", c.noise_sigma, "gauss");
  take(j, "seed", c.seed, "gauss");
}

json to_json(const datagen::GmmGenConfig& c) {
  json j{{"n", c.n},
         {"k", c.k},
         {"dim", c.dim},
         {"components", c.components},
         {"mean_low", c.mean_low},
         {"mean_high", c.mean_high},
         {"sigma", c.component_sigma},
         {"alpha", c.alpha_rot},
         {"kappa0", c.kappa0},
         {"kappa1", c.kappa1},
         {"gamma", c.gamma},
         {"beta", c.beta},
         {"tau", c.tau},
         {"seed", c.seed}};
  j["r_thresh"] = c.r_thresh ? json(*c.r_thresh) : json(nullptr);
  return j;
}

void apply(const json& j, datagen::GmmGenConfig& c) {
  detail::require_known_keys(j,
                             {"n", "k", "dim", "components", "mean_low", "mean_high", "sigma", "alpha", "kappa0",
                              "kappa1", "r_thresh", "gamma", "beta", "tau", "seed"},
                             "gmm");
  take(j, "n", c.n, "gmm");
  take(j, "k", c.k, "gmm");
  take(j, "dim", c.dim, "gmm");
  take(j, "components", c.components, "gmm");
  take(j, "mean_low", c.mean_low, "gmm");
  take(j, "mean_high", c.mean_high, "gmm");
  take(j, "sigma", c.component_sigma, "gmm");
  take(j, "alpha", c.alpha_rot, "gmm");
  take(j, "kappa0", c.kappa0, "gmm");
  take(j, "kappa1", c.kappa1, "gmm");
  take(j, "gamma", c.gamma, "gmm");
  take(j, "beta", c.beta, "gmm");
  take(j, "tau", c.tau, "gmm");
  take(j, "seed", c.seed, "gmm");
  if (j.contains("r_thresh")) {
    if (j["r_thresh"].is_null()) {
      c.r_thresh.reset();
    } else {
      double v = 0.0;
      take(j, "r_thresh", v, "gmm");
      c.r_thresh = v;
    }
  }
}

json to_json(const eval::RegimeConfig& c) {
  return json{{"n", c.n},
              {"k", c.k},
              {"reps", c.reps},
              {"master", to_json(c.master)},
              {"subset_seed", c.subset_seed},
              {"rule", to_json(c.rule)},
              {"train", to_json(c.train)},
              {"map", maps::family_name(c.family)},
              {"barycenter_iters", c.barycenter_iters},
              {"backend", backend_name(c.backend)},
              {"jobs", c.jobs}};
}

void apply(const json& j, eval::RegimeConfig& c) {
  detail::require_known_keys(j,
                             {"n", "k", "reps", "master", "subset_seed", "rule", "train", "map", "barycenter_iters",
                              "backend", "jobs"},
                             "regime");
  take(j, "n", c.n, "regime");
  take(j, "k", c.k, "regime");
  take(j, "reps", c.reps, "regime");
  take(j, "subset_seed", c.subset_seed, "regime");
  take(j, "barycenter_iters", c.barycenter_iters, "regime");
  take(j, "jobs", c.jobs, "regime");
  if (j.contains("master")) apply(j["master"], c.master);
  if (j.contains("rule")) apply(j["rule"], c.rule);
  if (j.contains("train")) apply(j["train"], c.train);
  std::string s;
  take(j, "map", s, "regime");
  if (!s.empty()) c.family = maps::parse_family(s);
  s.clear();
  take(j, "backend", s, "regime");
  if (!s.empty()) c.backend = parse_backend(s);
}

json parse(std::string_view text) { return detail::parse_json_text(text); }

json read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace wassreg::config

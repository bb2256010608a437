#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wassreg/config.hpp"
#include "wassreg/datagen.hpp"
#include "wassreg/errors.hpp"
#include "wassreg/eval.hpp"
#include "wassreg/measures.hpp"
#include "wassreg/ot.hpp"
#include "wassreg/svg.hpp"
#include "wassreg/train.hpp"

namespace fs = std::filesystem;
using namespace wassreg;

namespace {

enum Exit { kOk = 0, kUsage = 2, kValidation = 3, kNumeric = 4 };

// Usage problems found after CLI11 has accepted the command line.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr const char* kBlurHelp =
    "Entropic temperature eps multiplying KL(pi | a x b) next to the squared-Euclidean cost "
    "(blur = eps). Set convention=length_scale in a config file to read blur as a length (eps = blur^2).";

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("WASSREG_SEED");
  if (!s || !*s) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != std::string(s).size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(std::string("WASSREG_SEED is not an unsigned integer: '") + s + "'");
  }
}

void check_output(const fs::path& path, bool force) {
  if (!force && fs::exists(path)) throw UsageError(path.string() + " exists; pass --force to overwrite");
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw IoError("cannot write " + path.string());
}

RegressionDataset read_dataset(const fs::path& path) { return load_dataset(path, format_for_path(path)); }

template <class T>
void set_if(const std::optional<T>& v, T& dst) {
  if (v) dst = *v;
}

std::string plot_pair(const EmpiricalMeasure& source, const EmpiricalMeasure* prediction,
                      const EmpiricalMeasure& target, const std::string& title) {
  std::vector<svg::Series> series{{"source", "#1f77b4", &source}};
  if (prediction) series.push_back({"prediction", "#d62728", prediction});
  series.push_back({"target", "#2ca02c", &target});
  return svg::scatter(series, title);
}

// ---------------------------------------------------------------------------
// gen

struct GenArgs {
  std::string config, out;
  bool force = false;
  std::optional<std::size_t> n, k, dim, components;
  std::optional<double> sigma, mean_low, mean_high, r_thresh, tau;
  std::optional<std::uint64_t> seed;
};

void add_gen_options(CLI::App* cmd, GenArgs& a, bool gmm) {
  cmd->add_option("--config", a.config, "JSON config; flags override its keys")->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", a.out, "Output dataset (.json for JSON, binary otherwise)")->required();
  cmd->add_flag("--force", a.force, "Overwrite an existing output");
  cmd->add_option("--n", a.n, "Number of pairs (flag or config)");
  cmd->add_option("--k", a.k, "Support points per measure");
  cmd->add_option("--mean-low", a.mean_low, "Lower bound of the uniform mean box");
  cmd->add_option("--mean-high", a.mean_high, "Upper bound of the uniform mean box");
  cmd->add_option("--seed", a.seed, "Seed (default: WASSREG_SEED, then 0)");
  if (gmm) {
    cmd->add_option("--dim", a.dim, "Ambient dimension");
    cmd->add_option("--components", a.components, "Mixture components");
    cmd->add_option("--sigma", a.sigma, "Component standard deviation");
    cmd->add_option("--tau", a.tau, "Target noise standard deviation");
    cmd->add_option("--r-thresh", a.r_thresh, "Blend threshold (default: pilot median)");
  } else {
    cmd->add_option("--sigma", a.sigma, "Target noise standard deviation");
  }
}

template <class Cfg>
void finish_gen(const GenArgs& a, Cfg& cfg, const config::json& file_cfg) {
  if (auto s = env_seed()) cfg.seed = *s;
  config::apply(file_cfg, cfg);
  if (!a.n && !file_cfg.contains("n")) throw UsageError("gen: --n is required (flag or config key)");
  set_if(a.n, cfg.n);
  set_if(a.k, cfg.k);
  set_if(a.mean_low, cfg.mean_low);
  set_if(a.mean_high, cfg.mean_high);
  set_if(a.seed, cfg.seed);
}

int cmd_gen(const GenArgs& a, bool gmm) {
  check_output(a.out, a.force);
  const config::json file_cfg = a.config.empty() ? config::json::object() : config::read_file(a.config);
  RegressionDataset data(2);
  std::uint64_t seed = 0;
  if (gmm) {
    datagen::GmmGenConfig cfg;
    finish_gen(a, cfg, file_cfg);
    set_if(a.dim, cfg.dim);
    set_if(a.components, cfg.components);
    set_if(a.sigma, cfg.component_sigma);
    set_if(a.tau, cfg.tau);
    if (a.r_thresh) cfg.r_thresh = *a.r_thresh;
    data = datagen::gen_gmm_pairs(cfg);
    seed = cfg.seed;
  } else {
    datagen::GaussianGenConfig cfg;
    finish_gen(a, cfg, file_cfg);
    set_if(a.sigma, cfg.noise_sigma);
    data = datagen::gen_gaussian_pairs(cfg);
    seed = cfg.seed;
  }
  save_dataset(data, a.out, format_for_path(a.out));
  const std::size_t k = data.empty() ? 0 : data[0].source.size();
  std::printf("wrote %s: n=%zu k=%zu d=%zu seed=%llu\n", a.out.c_str(), data.size(), k, data.dim(),
              static_cast<unsigned long long>(seed));
  return kOk;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  std::string data, config, out, ref_file, map = "displacement", kernel;
  bool force = false;
  std::optional<std::size_t> ref_index, refs;
  std::optional<int> neighbors;
  std::optional<double> scale, lr, blur;
  std::optional<int> epochs, batch;
  std::optional<std::uint64_t> seed;
};

// Config file layout: {"train": {...}, "rule": {...}}.
void resolve_fit(const FitArgs& a, train::TrainConfig& tc, kernel::BandwidthRule& rule) {
  if (auto s = env_seed()) tc.seed = *s;
  if (!a.config.empty()) {
    const auto j = config::read_file(a.config);
    for (const auto& [key, _] : j.items())
      if (key != "train" && key != "rule") throw ValidationError("fit: unknown config key '" + key + "'");
    if (j.contains("train")) config::apply(j["train"], tc);
    if (j.contains("rule")) config::apply(j["rule"], rule);
  }
  set_if(a.epochs, tc.epochs);
  set_if(a.batch, tc.batch_size);
  set_if(a.lr, tc.learning_rate);
  set_if(a.blur, tc.sinkhorn.blur);
  set_if(a.seed, tc.seed);
  if (!a.kernel.empty()) tc.kernel = kernel::parse_family(a.kernel.c_str());
  set_if(a.neighbors, rule.neighbors);
  set_if(a.scale, rule.scale);
}

void report_fit(const train::TrainedLocalModel& m, const fs::path& path) {
  const double last = m.loss_history.empty() ? 0.0 : m.loss_history.back();
  std::printf("wrote %s: final_loss=%.6g bandwidth=%.6g pairs_used=%zu\n", path.c_str(), last, m.kernel.bandwidth,
              m.included_pair_ids.size());
}

int cmd_fit(const FitArgs& a) {
  const int chosen = (a.ref_index ? 1 : 0) + (a.ref_file.empty() ? 0 : 1) + (a.refs ? 1 : 0);
  if (chosen != 1) throw UsageError("fit: give exactly one of --ref-index, --ref-file, --refs");
  const RegressionDataset data = read_dataset(a.data);
  train::TrainConfig tc;
  // Regime default, capped for small datasets; flags or config override it.
  kernel::BandwidthRule rule{.neighbors = static_cast<int>(std::min<std::size_t>(10, data.size())), .scale = 1.0};
  resolve_fit(a, tc, rule);
  const maps::Family family = maps::parse_family(a.map);

  auto fit = [&](const EmpiricalMeasure& ref) {
    try {
      return train::fit_local_map(ref, data, family, rule, tc);
    } catch (const SupportError& e) {
      throw SupportError(std::string(e.what()) + " (try a larger --scale or --neighbors)");
    }
  };

  if (!a.refs) {
    check_output(a.out, a.force);
    EmpiricalMeasure ref = make_uniform_measure(Matrix(1, data.dim()));
    if (a.ref_index) {
      if (*a.ref_index >= data.size())
        throw UsageError("fit: --ref-index " + std::to_string(*a.ref_index) + " out of range (n=" +
                         std::to_string(data.size()) + ")");
      ref = data[*a.ref_index].source;
    } else {
      const RegressionDataset refs = read_dataset(a.ref_file);
      if (refs.empty()) throw ValidationError("fit: --ref-file holds no pairs");
      ref = refs[0].source;
    }
    const auto model = fit(ref);
    train::save_model(model, a.out);
    report_fit(model, a.out);
    return kOk;
  }

  // Multi-reference: -o names a directory receiving model_<i>.json.
  if (*a.refs == 0 || *a.refs > data.size()) throw UsageError("fit: --refs must lie in [1, n]");
  const fs::path dir = a.out;
  const auto picks = train::greedy_references(data, *a.refs, tc.sinkhorn);
  for (std::size_t i = 0; i < picks.size(); ++i) check_output(dir / ("model_" + std::to_string(i) + ".json"), a.force);
  fs::create_directories(dir);
  for (std::size_t i = 0; i < picks.size(); ++i) {
    const fs::path path = dir / ("model_" + std::to_string(i) + ".json");
    const auto model = fit(data[picks[i]].source);
    train::save_model(model, path);
    std::printf("reference pair %zu: ", picks[i]);
    report_fit(model, path);
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// predict / eval

std::vector<train::TrainedLocalModel> load_models(const std::vector<std::string>& paths) {
  std::vector<train::TrainedLocalModel> models;
  for (const auto& p : paths) {
    if (!fs::exists(p)) throw UsageError("model path " + p + " does not exist");
    if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(p))
        if (e.path().extension() == ".json") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) models.push_back(train::load_model(f));
    } else {
      models.push_back(train::load_model(p));
    }
  }
  if (models.empty()) throw UsageError("no model files found");
  return models;
}

struct PredictArgs {
  std::vector<std::string> models;
  std::string data, out;
  bool force = false;
};

// Writes (source, prediction) pairs under the input ids.
int cmd_predict(const PredictArgs& a) {
  check_output(a.out, a.force);
  const auto models = load_models(a.models);
  const RegressionDataset data = read_dataset(a.data);
  const auto& cfg = models.front().config.sinkhorn;
  RegressionDataset out(data.dim());
  for (const auto& pair : data.pairs()) {
    auto pred = train::predict(models, pair.source, cfg);
    std::printf("pair %llu -> model %zu (distance %.6g)\n", static_cast<unsigned long long>(pair.id),
                pred.model_index, pred.distance);
    out.add(MeasurePair{pair.id, pair.source, std::move(pred.measure)});
  }
  save_dataset(out, a.out, format_for_path(a.out));
  return kOk;
}

struct EvalArgs {
  std::vector<std::string> models;
  std::string data, train_data, out, plot_dir;
  bool force = false;
  int barycenter_iters = 30;
};

int cmd_eval(const EvalArgs& a) {
  if (!a.out.empty()) check_output(a.out, a.force);
  const auto models = load_models(a.models);
  const RegressionDataset test = read_dataset(a.data);
  const RegressionDataset train_set = read_dataset(a.train_data);
  if (test.empty() || train_set.empty()) throw UsageError("eval: test and training datasets must be non-empty");
  const auto& cfg = models.front().config.sinkhorn;

  const std::size_t k = test[0].target.size();
  std::vector<EmpiricalMeasure> targets;
  for (const auto& p : train_set.pairs()) targets.push_back(p.target);
  const auto bary = ot::free_support_barycenter(targets, k, cfg, a.barycenter_iters);

  std::vector<eval::RepResult> runs;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& pair = test[i];
    eval::RepResult r;
    r.rep = static_cast<int>(i);
    r.test_pair_id = pair.id;
    try {
      auto pred = train::predict(models, pair.source, cfg);
      r.fit = eval::r2w(pair.target, pred.measure, bary, cfg);
      r.abs_err = r.fit.ss_res;
      r.ok = true;
      if (!a.plot_dir.empty()) {
        const fs::path svg = fs::path(a.plot_dir) / ("pair_" + std::to_string(pair.id) + ".svg");
        write_text(svg, plot_pair(pair.source, &pred.measure, pair.target, "pair " + std::to_string(pair.id)));
      }
    } catch (const DegenerateError& e) {
      r.error = e.what();
    }
    runs.push_back(std::move(r));
  }
  const auto report = eval::summarize(test.dim(), train_set.size(), k, std::move(runs));
  const std::string csv = eval::csv_header() + "\n" + eval::csv_row(report) + "\n";
  std::fputs(csv.c_str(), stdout);
  if (!a.out.empty()) write_text(a.out, csv);
  return report.failures == 0 ? kOk : kNumeric;
}

// ---------------------------------------------------------------------------
// regime

struct RegimeArgs {
  std::string config, out, plot_dir;
  bool force = false;
  std::optional<std::size_t> d, n, k;
  std::optional<int> reps, jobs, epochs;
  std::optional<double> blur;
  std::optional<std::uint64_t> seed;
  std::string map;
};

int cmd_regime(const RegimeArgs& a) {
  if (!a.out.empty()) check_output(a.out, a.force);
  eval::RegimeConfig cfg;
  if (auto s = env_seed()) cfg.master.seed = *s;
  if (!a.config.empty()) config::apply(config::read_file(a.config), cfg);
  set_if(a.d, cfg.master.dim);
  set_if(a.n, cfg.n);
  set_if(a.k, cfg.k);
  set_if(a.reps, cfg.reps);
  set_if(a.jobs, cfg.jobs);
  set_if(a.epochs, cfg.train.epochs);
  set_if(a.blur, cfg.train.sinkhorn.blur);
  set_if(a.seed, cfg.master.seed);
  if (!a.map.empty()) cfg.family = maps::parse_family(a.map);
  // The master must hold at least the regime's sizes.
  cfg.master.n = std::max(cfg.master.n, cfg.n);
  cfg.master.k = std::max(cfg.master.k, cfg.k);

  const auto report = eval::run_regime(cfg);
  for (const auto& r : report.runs) {
    if (!r.ok) std::fprintf(stderr, "rep %d failed: %s\n", r.rep, r.error.c_str());
    if (!a.plot_dir.empty() && r.ok && r.source && r.prediction && r.target) {
      const fs::path svg = fs::path(a.plot_dir) / ("rep_" + std::to_string(r.rep) + ".svg");
      write_text(svg, plot_pair(*r.source, &*r.prediction, *r.target, "rep " + std::to_string(r.rep)));
    }
  }
  const std::string csv = eval::csv_header() + "\n" + eval::csv_row(report) + "\n";
  std::fputs(csv.c_str(), stdout);
  if (!a.out.empty()) write_text(a.out, csv);
  return report.failures == report.reps ? kNumeric : kOk;
}

// ---------------------------------------------------------------------------
// plot

struct PlotArgs {
  std::string data, pred, out;
  std::size_t pair = 0;
  bool force = false;
};

int cmd_plot(const PlotArgs& a) {
  check_output(a.out, a.force);
  const RegressionDataset data = read_dataset(a.data);
  if (a.pair >= data.size()) throw UsageError("plot: --pair out of range");
  const auto& p = data[a.pair];
  std::optional<EmpiricalMeasure> pred;
  if (!a.pred.empty()) {
    const RegressionDataset preds = read_dataset(a.pred);
    for (const auto& q : preds.pairs())
      if (q.id == p.id) pred = q.target;
    if (!pred) throw ValidationError("plot: no prediction for pair id " + std::to_string(p.id));
  }
  write_text(a.out, plot_pair(p.source, pred ? &*pred : nullptr, p.target, "pair " + std::to_string(p.id)));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local Wasserstein regression between empirical measures"};
  app.require_subcommand(1);
  app.footer(std::string("Blur: ") + kBlurHelp +
             "\nExit codes: 0 ok, 2 usage, 3 invalid input or config, 4 numerical failure.");

  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen->require_subcommand(1);
  GenArgs gauss_args, gmm_args;
  auto* gen_gauss = gen->add_subcommand("gauss", "Gaussian clouds, mean-dependent rotation");
  add_gen_options(gen_gauss, gauss_args, false);
  auto* gen_gmm = gen->add_subcommand("gmm", "Gaussian mixtures, radius-dependent rotation/shear blend");
  add_gen_options(gen_gmm, gmm_args, true);

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "Fit local transport maps");
  fit->add_option("--data", fit_args.data, "Training dataset")->required()->check(CLI::ExistingFile);
  fit->add_option("--ref-index", fit_args.ref_index, "Use the source of this pair as the reference");
  fit->add_option("--ref-file", fit_args.ref_file, "Dataset whose first source is the reference")
      ->check(CLI::ExistingFile);
  fit->add_option("--refs", fit_args.refs, "Greedy farthest-point references; -o is then a directory");
  fit->add_option("--map", fit_args.map, "Map family")->check(CLI::IsMember({"affine", "displacement"}));
  fit->add_option("--config", fit_args.config, "JSON {\"train\": {...}, \"rule\": {...}}")
      ->check(CLI::ExistingFile);
  fit->add_option("--epochs", fit_args.epochs);
  fit->add_option("--batch", fit_args.batch);
  fit->add_option("--lr", fit_args.lr);
  fit->add_option("--blur", fit_args.blur, kBlurHelp);
  fit->add_option("--kernel", fit_args.kernel)->check(CLI::IsMember({"gaussian", "epanechnikov"}));
  fit->add_option("--neighbors", fit_args.neighbors, "Bandwidth rule: k-th nearest source (default min(10, n))");
  fit->add_option("--scale", fit_args.scale, "Bandwidth rule: multiplier");
  fit->add_option("--seed", fit_args.seed, "Seed (default: WASSREG_SEED, then 0)");
  fit->add_option("-o,--out", fit_args.out, "Model file, or directory with --refs")->required();
  fit->add_flag("--force", fit_args.force);

  PredictArgs pred_args;
  auto* pred = app.add_subcommand("predict", "Push test sources through the nearest model");
  pred->add_option("--models", pred_args.models, "Model files or directories")->required()->expected(1, -1);
  pred->add_option("--data", pred_args.data, "Dataset whose sources are predicted")
      ->required()
      ->check(CLI::ExistingFile);
  pred->add_option("-o,--out", pred_args.out, "Output dataset of (source, prediction) pairs")->required();
  pred->add_flag("--force", pred_args.force);

  EvalArgs eval_args;
  auto* ev = app.add_subcommand("eval", "Score models on test pairs; prints CSV");
  ev->add_option("--models", eval_args.models, "Model files or directories")->required()->expected(1, -1);
  ev->add_option("--data", eval_args.data, "Test dataset")->required()->check(CLI::ExistingFile);
  ev->add_option("--train", eval_args.train_data, "Training dataset (barycenter of its targets)")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--barycenter-iters", eval_args.barycenter_iters);
  ev->add_option("--plot", eval_args.plot_dir, "Directory for one SVG per test pair");
  ev->add_option("-o,--out", eval_args.out, "Also write the CSV here");
  ev->add_flag("--force", eval_args.force);

  RegimeArgs reg_args;
  auto* reg = app.add_subcommand("regime", "Repeated subsample/fit/score on a GMM master; prints CSV");
  reg->add_option("--config", reg_args.config, "Regime JSON; flags override its keys")->check(CLI::ExistingFile);
  reg->add_option("--d", reg_args.d, "Ambient dimension of the master");
  reg->add_option("--n", reg_args.n);
  reg->add_option("--k", reg_args.k);
  reg->add_option("--reps", reg_args.reps);
  reg->add_option("--jobs", reg_args.jobs, "Repetitions run in parallel");
  reg->add_option("--epochs", reg_args.epochs);
  reg->add_option("--blur", reg_args.blur, kBlurHelp);
  reg->add_option("--map", reg_args.map)->check(CLI::IsMember({"affine", "displacement"}));
  reg->add_option("--seed", reg_args.seed, "Master seed (default: WASSREG_SEED, then 0)");
  reg->add_option("--plot", reg_args.plot_dir, "Directory for one SVG per repetition");
  reg->add_option("-o,--out", reg_args.out, "Also write the CSV here");
  reg->add_flag("--force", reg_args.force);

  PlotArgs plot_args;
  auto* plot = app.add_subcommand("plot", "SVG scatter of one pair (and its prediction)");
  plot->add_option("--data", plot_args.data)->required()->check(CLI::ExistingFile);
  plot->add_option("--pred", plot_args.pred, "Output of predict")->check(CLI::ExistingFile);
  plot->add_option("--pair", plot_args.pair, "Pair index");
  plot->add_option("-o,--out", plot_args.out)->required();
  plot->add_flag("--force", plot_args.force);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (gen_gauss->parsed()) return cmd_gen(gauss_args, false);
    if (gen_gmm->parsed()) return cmd_gen(gmm_args, true);
    if (fit->parsed()) return cmd_fit(fit_args);
    if (pred->parsed()) return cmd_predict(pred_args);
    if (ev->parsed()) return cmd_eval(eval_args);
    if (reg->parsed()) return cmd_regime(reg_args);
    if (plot->parsed()) return cmd_plot(plot_args);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const TrainingError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumeric;
  } catch (const DegenerateError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumeric;
  } catch (const ParseError& e) {
    if (e.line() > 0)
      std::fprintf(stderr, "parse error (line %zu): %s\n", e.line(), e.what());
    else
      std::fprintf(stderr, "parse error (offset %zu): %s\n", e.offset(), e.what());
    return kValidation;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidation;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidation;
  }
  return kUsage;
}

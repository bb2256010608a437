#include <fstream>
#include <sstream>

#include "json_util.hpp"
#include "map_json.hpp"
#include "wassreg/config.hpp"
#include "wassreg/errors.hpp"
#include "wassreg/train.hpp"

namespace wassreg::train {

namespace {

constexpr const char* kFormatTag = "wassreg-model";
constexpr int kVersion = 1;

}  // namespace

std::string model_to_json(const TrainedLocalModel& m) {
  detail::json j;
  j["format"] = kFormatTag;
  j["version"] = kVersion;
  j["reference"] = detail::measure_to_json(m.reference);
  j["map"] = detail::map_to_jvalue(m.map);
  j["kernel"] = {{"family", kernel::family_name(m.kernel.family)},
                 {"bandwidth", m.kernel.bandwidth},
                 {"ambient_dim", m.kernel.ambient_dim}};
  j["rule"] = config::to_json(m.rule);
  j["included_pair_ids"] = m.included_pair_ids;
  j["included_weights"] = m.included_weights;
  j["loss_history"] = m.loss_history;
  j["nearest_distance"] = m.nearest_distance;
  j["config"] = config::to_json(m.config);
  return j.dump(1);
}

TrainedLocalModel model_from_json(std::string_view text) {
  const detail::json j = detail::parse_json_text(text);
  detail::require_known_keys(j,
                             {"format", "version", "reference", "map", "kernel", "rule", "included_pair_ids",
                              "included_weights", "loss_history", "nearest_distance", "config"},
                             "model");
  try {
    if (j.at("format").get<std::string>() != kFormatTag) throw ValidationError("model: not a wassreg model file");
    if (j.at("version").get<int>() != kVersion)
      throw ValidationError("model: unsupported version " + std::to_string(j.at("version").get<int>()));
    const auto& kj = j.at("kernel");
    detail::require_known_keys(kj, {"family", "bandwidth", "ambient_dim"}, "model.kernel");
    kernel::KernelSpec spec{kernel::parse_family(kj.at("family").get<std::string>().c_str()),
                            kj.at("bandwidth").get<double>(), kj.at("ambient_dim").get<int>()};
    spec.validate();
    kernel::BandwidthRule rule;
    config::apply(j.at("rule"), rule);
    TrainConfig cfg;
    config::apply(j.at("config"), cfg);
    TrainedLocalModel m{detail::measure_from_json(j.at("reference")),
                        detail::map_from_jvalue(j.at("map")),
                        spec,
                        rule,
                        j.at("included_pair_ids").get<std::vector<std::uint64_t>>(),
                        j.at("included_weights").get<std::vector<double>>(),
                        j.at("loss_history").get<std::vector<double>>(),
                        j.at("nearest_distance").get<double>(),
                        cfg};
    if (m.reference.dim() != maps::map_dim(m.map)) throw DimensionError("model: reference and map dimensions differ");
    if (m.included_pair_ids.size() != m.included_weights.size())
      throw ValidationError("model: included ids and weights differ in length");
    return m;
  } catch (const detail::json::exception& e) {
    throw ValidationError(std::string("model: ") + e.what());
  }
}

void save_model(const TrainedLocalModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << model_to_json(model) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

TrainedLocalModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace wassreg::train

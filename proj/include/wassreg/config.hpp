#pragma once

#include <filesystem>
#include <string_view>

#include <json.hpp>

#include "wassreg/datagen.hpp"
#include "wassreg/eval.hpp"
#include "wassreg/kernel.hpp"
#include "wassreg/ot.hpp"
#include "wassreg/train.hpp"

// JSON views of the configuration structs. `apply` overwrites only the keys
// present in the object and throws ValidationError on unknown keys or
// wrongly typed values, so defaults < config file < flags compose by
// applying in that order.
namespace wassreg::config {

using nlohmann::json;

json to_json(const ot::SinkhornConfig& c);
json to_json(const kernel::BandwidthRule& r);
json to_json(const train::TrainConfig& c);
json to_json(const datagen::GaussianGenConfig& c);
json to_json(const datagen::GmmGenConfig& c);
json to_json(const eval::RegimeConfig& c);

void apply(const json& j, ot::SinkhornConfig& c);
void apply(const json& j, kernel::BandwidthRule& r);
void apply(const json& j, train::TrainConfig& c);
void apply(const json& j, datagen::GaussianGenConfig& c);
void apply(const json& j, datagen::GmmGenConfig& c);
void apply(const json& j, eval::RegimeConfig& c);

// ParseError (with line) on malformed text, IoError on unreadable files.
json parse(std::string_view text);
json read_file(const std::filesystem::path& path);

}  // namespace wassreg::config

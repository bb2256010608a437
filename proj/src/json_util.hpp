#pragma once

#include <json.hpp>

#include "wassreg/matrix.hpp"
#include "wassreg/measures.hpp"

namespace wassreg::detail {

using nlohmann::json;

// {"points": [[...], ...], "weights": [...]}
json measure_to_json(const EmpiricalMeasure& m);
EmpiricalMeasure measure_from_json(const json& j);

// Row-major flat array plus an explicit [rows, cols] shape.
json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j);

// Rejects any key of `j` that is not listed in `allowed`.
void require_known_keys(const json& j, std::initializer_list<const char*> allowed, const char* where);

// Parses text and converts nlohmann parse errors into ParseError with a
// 1-based line number.
json parse_json_text(std::string_view text);

}  // namespace wassreg::detail

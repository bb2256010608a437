#pragma once

#include "json_util.hpp"
#include "wassreg/maps.hpp"

namespace wassreg::detail {

json map_to_jvalue(const maps::TransportMapParams& p);
maps::TransportMapParams map_from_jvalue(const json& j);

}  // namespace wassreg::detail

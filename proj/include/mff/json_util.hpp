#pragma once

#include "json.hpp"

namespace mff {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

}  // namespace mff

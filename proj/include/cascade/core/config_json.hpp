#pragma once

#include <json.hpp>

#include "cascade/core/types.hpp"

namespace cascade {

void to_json(nlohmann::json& j, const GeneratorConfig& c);
// Missing keys keep their defaults, so partial config files are accepted.
void from_json(const nlohmann::json& j, GeneratorConfig& c);

}  // namespace cascade

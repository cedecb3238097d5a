#pragma once

#include <filesystem>

#include "cascade/neuralkit/layers.hpp"
#include <json.hpp>

namespace cascade::nk {

inline constexpr int kCheckpointFormatVersion = 1;

// Writes <dir>/manifest.json (names, shapes, offsets, metadata) and
// <dir>/params.bin (little-endian float64).
void save_checkpoint(const std::filesystem::path& dir, const ParameterList& params,
                     const nlohmann::json& metadata = nlohmann::json::object());

// Loads into params in place; names and shapes must match. Returns metadata.
nlohmann::json load_checkpoint(const std::filesystem::path& dir, const ParameterList& params);

}  // namespace cascade::nk

#pragma once

#include <filesystem>

#include "cascade/core/types.hpp"

namespace cascade {

inline constexpr int kDatasetFormatVersion = 1;

// Directory layout:
//   manifest.json   dims, priors, generator config, seed, channel names, split
//   sensors.bin     float32 LE, n * T * D
//   thermal.bin     float32 LE, n * H * W
//   labels.bin      float32 LE, n
//   hotspots.bin    float32 LE, n * 4 (row0, col0, row1, col1; -1 if absent)
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace cascade

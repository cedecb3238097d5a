#pragma once

#include <span>
#include <vector>

#include "cascade/core/types.hpp"
#include "cascade/neuralkit/tensor.hpp"
#include "cascade/preprocess/preprocess.hpp"

namespace cascade::baselines {

// Every sample of a dataset in model space: z-scored sensor windows and
// thermal frames rescaled to [0, 1]. Index-aligned with Dataset::samples.
struct PreparedData {
  std::vector<SensorWindow> sensors;
  std::vector<ThermalFrame> thermal;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

struct Normalization {
  ZScoreScaler scaler;
  ThermalNormalizer thermal;
};

// Scaler fitted on the training split only.
Normalization fit_normalization(const Dataset& dataset);
PreparedData prepare(const Dataset& dataset, const Normalization& norm);

// Zeroes one modality of every sample (in model space).
PreparedData corrupt(const PreparedData& data, Modality which);
// Adds N(0, sigma^2) to every z-scored sensor value.
PreparedData with_sensor_noise(const PreparedData& data, double sigma, std::uint64_t seed);

struct AugmentOptions {
  bool enabled = false;
  SensorAugmentConfig sensor;
  ThermalAugmentConfig thermal;
};

// [N, T, D]
nk::Tensor sensor_batch(const PreparedData& data, std::span<const std::size_t> idx,
                        const AugmentOptions& augment = {}, Rng* rng = nullptr);
// [N, 1, H, W]
nk::Tensor thermal_batch(const PreparedData& data, std::span<const std::size_t> idx,
                         const AugmentOptions& augment = {}, Rng* rng = nullptr);
std::vector<int> label_batch(const PreparedData& data, std::span<const std::size_t> idx);

}  // namespace cascade::baselines

#pragma once

#include "cascade/core/types.hpp"

namespace cascade {

// Builds a synthetic multimodal dataset. The result is a pure function of
// `config` (including its seed) and carries stratified train/validation tags
// with config.train_fraction of each class in train.
//
// Sensor channels:
//   0 ("ntc")       mean shifts with severity * sensor_signal_strength
//   1, 2 ("pm*")    within-window variance inflates with severity
//   3.. (others)    uninformative
// Danger windows additionally carry transient spikes at danger_spike_rate.
//
// Thermal frames hold a smooth ambient background plus one warm equipment
// region. For anomalous labels that region is the fault hotspot, recorded in
// ThermalFrame::hotspot, and its peak temperature grows with severity at
// thermal_signal_strength. Normal frames carry a benign region of the same
// shape and no hotspot annotation. Pixel noise variance is scaled by
// thermal_variance_inflation.
Dataset generate_dataset(const GeneratorConfig& config);

}  // namespace cascade

#pragma once

#include <cstdint>

#include "cascade/core/types.hpp"

namespace cascade {

// Assigns split tags so that, within every class, round(fraction_train * n_c)
// samples go to train and the rest to validation. Deterministic in `seed`.
Dataset stratified_split(Dataset dataset, double fraction_train, std::uint64_t seed);

}  // namespace cascade

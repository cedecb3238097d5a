#pragma once

#include <vector>

#include "cascade/forest/forest.hpp"

namespace cascade {

// fit_tree over an explicit row list; rows may repeat (bootstrap).
DecisionTree fit_tree_on_rows(const FeatureMatrix& X, std::span<const LabelClass> y,
                              std::span<const double> sample_weights, const ForestConfig& config,
                              Rng& rng, std::vector<std::size_t> rows);

}  // namespace cascade

#include "cascade/core/split.hpp"

#include <algorithm>
#include <cmath>

#include "cascade/common/error.hpp"
#include "cascade/common/rng.hpp"

namespace cascade {

Dataset stratified_split(Dataset dataset, double fraction_train, std::uint64_t seed) {
  if (!(fraction_train > 0.0 && fraction_train < 1.0)) {
    throw InvalidArgument("fraction_train must lie in (0, 1)");
  }
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    by_class[static_cast<std::size_t>(to_index(dataset.samples[i].label))].push_back(i);
  }
  dataset.split.assign(dataset.samples.size(), Split::Validation);
  for (int c = 0; c < kNumClasses; ++c) {
    auto& members = by_class[static_cast<std::size_t>(c)];
    if (members.empty()) continue;
    if (members.size() < 2) {
      throw InvalidArgument("class " + std::string(label_name(label_from_index(c))) +
                            " has fewer than 2 samples; cannot stratify");
    }
    Rng rng = make_rng(seed, 0x5b11u + static_cast<std::uint64_t>(c));
    std::shuffle(members.begin(), members.end(), rng);
    auto n_train = static_cast<std::size_t>(
        std::llround(fraction_train * static_cast<double>(members.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, members.size() - 1);
    for (std::size_t k = 0; k < n_train; ++k) dataset.split[members[k]] = Split::Train;
  }
  return dataset;
}

}  // namespace cascade

#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cascade/features/features.hpp"
#include "cascade/forest/forest.hpp"

namespace cascade {

// Interventional Shapley attribution of Forest::predict_proba.
struct AttributionReport {
  std::vector<ClassVector> phi;  // [n_features][class]
  ClassVector base_value{};      // mean model output over the background
  ClassVector prediction{};      // predict_proba(x)
  std::vector<std::string> feature_names;

  // base_value + sum_i phi[i] for one class.
  double reconstructed(int cls) const;
};

inline constexpr std::size_t kMaxBruteForceFeatures = 16;

// Reference implementation: enumerates all 2^M coalitions. f_x(S) is the mean
// over background rows b of predict_proba on the hybrid row taking features
// in S from x and the rest from b. Refuses M > 16.
AttributionReport explain_exact_bruteforce(const Forest& forest, std::span<const double> x,
                                           const FeatureMatrix& background);

// Same quantity via per-(tree, background row) traversal: a node where x and
// b route differently on a feature not yet seen on the path forks the walk;
// each leaf credits the features split on x's side with weight
// (|Sx|-1)! |Sb|! / (|Sx|+|Sb|)! and debits those on b's side with
// |Sx|! (|Sb|-1)! / (|Sx|+|Sb|)!.
AttributionReport explain_treeshap(const Forest& forest, std::span<const double> x,
                                   const FeatureMatrix& background);

// Uniform sample of `count` rows (without replacement) as the background set.
FeatureMatrix sample_background(const FeatureMatrix& X, std::size_t count, std::uint64_t seed);

enum class SensorAggregation { MeanAbsAcrossClasses, SingleClass };

struct SensorImportance {
  std::string channel;
  double importance = 0.0;
};

// Phi_d = |phi_mean_d| + |phi_std_d| + |phi_min_d| + |phi_max_d|, using either
// one class or the mean of that sum across classes. Sorted descending;
// feature names must follow "<channel>_<stat>".
std::vector<SensorImportance> aggregate_by_sensor(
    const AttributionReport& report, std::span<const std::string> channel_names,
    SensorAggregation mode = SensorAggregation::MeanAbsAcrossClasses, int cls = 0);

// Same aggregation over per-sample reports, averaging Phi_d across samples.
std::vector<SensorImportance> aggregate_by_sensor(
    std::span<const AttributionReport> reports, std::span<const std::string> channel_names,
    SensorAggregation mode = SensorAggregation::MeanAbsAcrossClasses, int cls = 0);

// Rows: feature,class,phi.
void write_attribution_csv(std::ostream& out, const AttributionReport& report);
nlohmann::json attribution_summary_json(const AttributionReport& report,
                                        std::span<const SensorImportance> ranking);

}  // namespace cascade

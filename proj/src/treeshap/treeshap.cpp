#include "cascade/treeshap/treeshap.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <iomanip>
#include <numeric>

#include "cascade/common/error.hpp"
#include "cascade/common/rng.hpp"

namespace cascade {
namespace {

void check_inputs(const Forest& forest, std::span<const double> x,
                  const FeatureMatrix& background) {
  if (x.size() != forest.n_features) throw DimensionError("explain: x has wrong feature count");
  if (background.rows == 0) throw InvalidArgument("explain: background set is empty");
  if (background.cols != forest.n_features) {
    throw DimensionError("explain: background has wrong feature count");
  }
}

AttributionReport empty_report(const Forest& forest, std::span<const double> x,
                               const FeatureMatrix& background) {
  AttributionReport r;
  r.phi.assign(forest.n_features, ClassVector{});
  r.prediction = forest.predict_proba(x);
  for (std::size_t b = 0; b < background.rows; ++b) {
    const auto p = forest.predict_proba(background.row(b));
    for (int c = 0; c < kNumClasses; ++c) r.base_value[c] += p[c];
  }
  for (double& v : r.base_value) v /= static_cast<double>(background.rows);
  r.feature_names = background.names;
  if (r.feature_names.size() != forest.n_features) {
    r.feature_names.clear();
    for (std::size_t i = 0; i < forest.n_features; ++i) {
      r.feature_names.push_back("f" + std::to_string(i));
    }
  }
  return r;
}

// factorial(n) for n <= 170 in double precision.
const std::vector<double>& factorials() {
  static const std::vector<double> table = [] {
    std::vector<double> f(171, 1.0);
    for (std::size_t i = 1; i < f.size(); ++i) f[i] = f[i - 1] * static_cast<double>(i);
    return f;
  }();
  return table;
}

struct LeafSums {
  ClassVector pos{};  // credited to features on x's side
  ClassVector neg{};  // debited from features on the background side
};

enum class Side : signed char { None = 0, Foreground = 1, Background = 2 };

class InterventionalWalk {
 public:
  InterventionalWalk(const DecisionTree& tree, std::span<const double> x,
                     std::span<const double> z, std::vector<Side>& side,
                     std::vector<ClassVector>& phi)
      : tree_(tree), x_(x), z_(z), side_(side), phi_(phi) {}

  LeafSums run() { return visit(0); }

 private:
  LeafSums visit(int id) {
    const TreeNode& node = tree_.nodes[id];
    if (node.is_leaf()) return leaf(node);
    const int f = node.feature;
    const int x_child = x_[f] <= node.threshold ? node.left : node.right;
    const int z_child = z_[f] <= node.threshold ? node.left : node.right;
    if (x_child == z_child) return visit(x_child);
    if (side_[f] == Side::Foreground) return visit(x_child);
    if (side_[f] == Side::Background) return visit(z_child);

    side_[f] = Side::Foreground;
    ++n_fore_;
    const LeafSums from_x = visit(x_child);
    --n_fore_;
    side_[f] = Side::Background;
    ++n_back_;
    const LeafSums from_z = visit(z_child);
    --n_back_;
    side_[f] = Side::None;

    LeafSums total;
    for (int c = 0; c < kNumClasses; ++c) {
      phi_[f][c] += from_x.pos[c] - from_z.neg[c];
      total.pos[c] = from_x.pos[c] + from_z.pos[c];
      total.neg[c] = from_x.neg[c] + from_z.neg[c];
    }
    return total;
  }

  LeafSums leaf(const TreeNode& node) const {
    LeafSums s;
    const int n = n_fore_ + n_back_;
    if (n == 0) return s;
    const auto& fact = factorials();
    const double wpos = n_fore_ > 0 ? fact[n_fore_ - 1] * fact[n_back_] / fact[n] : 0.0;
    const double wneg = n_back_ > 0 ? fact[n_fore_] * fact[n_back_ - 1] / fact[n] : 0.0;
    for (int c = 0; c < kNumClasses; ++c) {
      s.pos[c] = wpos * node.probability[c];
      s.neg[c] = wneg * node.probability[c];
    }
    return s;
  }

  const DecisionTree& tree_;
  std::span<const double> x_;
  std::span<const double> z_;
  std::vector<Side>& side_;
  std::vector<ClassVector>& phi_;
  int n_fore_ = 0;
  int n_back_ = 0;
};

}  // namespace

double AttributionReport::reconstructed(int cls) const {
  double total = base_value[cls];
  for (const auto& p : phi) total += p[cls];
  return total;
}

AttributionReport explain_exact_bruteforce(const Forest& forest, std::span<const double> x,
                                           const FeatureMatrix& background) {
  check_inputs(forest, x, background);
  const std::size_t m = forest.n_features;
  if (m > kMaxBruteForceFeatures) {
    throw InvalidArgument("brute-force Shapley refuses " + std::to_string(m) +
                          " features (limit " + std::to_string(kMaxBruteForceFeatures) + ")");
  }
  AttributionReport report = empty_report(forest, x, background);
  const std::size_t n_subsets = std::size_t{1} << m;

  // Coalition values f_x(S).
  std::vector<ClassVector> value(n_subsets, ClassVector{});
  std::vector<double> hybrid(m);
  for (std::size_t mask = 0; mask < n_subsets; ++mask) {
    ClassVector acc{};
    for (std::size_t b = 0; b < background.rows; ++b) {
      const auto bg = background.row(b);
      for (std::size_t i = 0; i < m; ++i) hybrid[i] = (mask >> i) & 1U ? x[i] : bg[i];
      const auto p = forest.predict_proba(hybrid);
      for (int c = 0; c < kNumClasses; ++c) acc[c] += p[c];
    }
    for (int c = 0; c < kNumClasses; ++c) {
      value[mask][c] = acc[c] / static_cast<double>(background.rows);
    }
  }

  const auto& fact = factorials();
  std::vector<double> weight(m);
  for (std::size_t s = 0; s < m; ++s) weight[s] = fact[s] * fact[m - s - 1] / fact[m];
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    for (std::size_t mask = 0; mask < n_subsets; ++mask) {
      if (mask & bit) continue;
      const double w = weight[static_cast<std::size_t>(std::popcount(mask))];
      for (int c = 0; c < kNumClasses; ++c) {
        report.phi[i][c] += w * (value[mask | bit][c] - value[mask][c]);
      }
    }
  }
  return report;
}

AttributionReport explain_treeshap(const Forest& forest, std::span<const double> x,
                                   const FeatureMatrix& background) {
  check_inputs(forest, x, background);
  AttributionReport report = empty_report(forest, x, background);
  std::vector<Side> side(forest.n_features, Side::None);
  for (const auto& tree : forest.trees) {
    for (std::size_t b = 0; b < background.rows; ++b) {
      InterventionalWalk(tree, x, background.row(b), side, report.phi).run();
    }
  }
  const double scale =
      1.0 / (static_cast<double>(forest.trees.size()) * static_cast<double>(background.rows));
  for (auto& p : report.phi) {
    for (double& v : p) v *= scale;
  }
  return report;
}

FeatureMatrix sample_background(const FeatureMatrix& X, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> idx(X.rows);
  std::iota(idx.begin(), idx.end(), 0);
  if (count >= X.rows) return X.select_rows(idx);
  Rng rng = make_rng(seed, 0xbac6);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, X.rows - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  return X.select_rows(idx);
}

namespace {

// Maps each feature to its channel position, validating the naming contract.
std::vector<std::size_t> channel_of_features(const std::vector<std::string>& names,
                                             std::span<const std::string> channels) {
  std::vector<std::size_t> out;
  out.reserve(names.size());
  for (const auto& name : names) {
    const auto cut = name.rfind('_');
    if (cut == std::string::npos) throw InvalidArgument("unrecognized feature name: " + name);
    const std::string channel = name.substr(0, cut);
    const std::string stat = name.substr(cut + 1);
    const bool known_stat = std::find(std::begin(kStatNames), std::end(kStatNames), stat) !=
                            std::end(kStatNames);
    const auto it = std::find(channels.begin(), channels.end(), channel);
    if (!known_stat || it == channels.end()) {
      throw InvalidArgument("unrecognized feature name: " + name);
    }
    out.push_back(static_cast<std::size_t>(it - channels.begin()));
  }
  return out;
}

std::vector<double> channel_sums(const AttributionReport& report,
                                 const std::vector<std::size_t>& owner, std::size_t n_channels,
                                 SensorAggregation mode, int cls) {
  std::vector<double> sums(n_channels, 0.0);
  for (std::size_t i = 0; i < report.phi.size(); ++i) {
    double v = 0.0;
    if (mode == SensorAggregation::SingleClass) {
      v = std::abs(report.phi[i][cls]);
    } else {
      for (int c = 0; c < kNumClasses; ++c) v += std::abs(report.phi[i][c]);
      v /= kNumClasses;
    }
    sums[owner[i]] += v;
  }
  return sums;
}

std::vector<SensorImportance> rank(std::span<const std::string> channels,
                                   const std::vector<double>& sums) {
  std::vector<SensorImportance> out;
  for (std::size_t d = 0; d < channels.size(); ++d) out.push_back({channels[d], sums[d]});
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.importance > b.importance;
  });
  return out;
}

}  // namespace

std::vector<SensorImportance> aggregate_by_sensor(const AttributionReport& report,
                                                  std::span<const std::string> channel_names,
                                                  SensorAggregation mode, int cls) {
  return aggregate_by_sensor(std::span<const AttributionReport>(&report, 1), channel_names, mode,
                             cls);
}

std::vector<SensorImportance> aggregate_by_sensor(std::span<const AttributionReport> reports,
                                                  std::span<const std::string> channel_names,
                                                  SensorAggregation mode, int cls) {
  if (cls < 0 || cls >= kNumClasses) throw InvalidArgument("class index out of range");
  std::vector<double> total(channel_names.size(), 0.0);
  for (const auto& r : reports) {
    if (r.feature_names.size() != r.phi.size()) {
      throw DimensionError("attribution report names and values disagree");
    }
    const auto owner = channel_of_features(r.feature_names, channel_names);
    const auto sums = channel_sums(r, owner, channel_names.size(), mode, cls);
    for (std::size_t d = 0; d < total.size(); ++d) total[d] += sums[d];
  }
  if (!reports.empty()) {
    for (double& v : total) v /= static_cast<double>(reports.size());
  }
  return rank(channel_names, total);
}

void write_attribution_csv(std::ostream& out, const AttributionReport& report) {
  out << "feature,class,phi\n" << std::setprecision(17);
  for (std::size_t i = 0; i < report.phi.size(); ++i) {
    for (int c = 0; c < kNumClasses; ++c) {
      out << report.feature_names[i] << ',' << label_name(static_cast<LabelClass>(c)) << ','
          << report.phi[i][c] << '\n';
    }
  }
}

nlohmann::json attribution_summary_json(const AttributionReport& report,
                                        std::span<const SensorImportance> ranking) {
  nlohmann::json j;
  j["convention"] = "interventional (background-marginalized) Shapley values of predict_proba";
  j["base_value"] = report.base_value;
  j["prediction"] = report.prediction;
  nlohmann::json r = nlohmann::json::array();
  for (const auto& s : ranking) r.push_back({{"channel", s.channel}, {"importance", s.importance}});
  j["sensor_ranking"] = r;
  return j;
}

}  // namespace cascade

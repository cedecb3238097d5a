#include <algorithm>
#include <cmath>
#include <numeric>

#include "cascade/common/error.hpp"
#include "cascade/evalstat/evalstat.hpp"

namespace cascade {

namespace {

void check_labels(std::span<const int> y) {
  for (int v : y) {
    if (v < 0 || v >= kNumClasses) throw InvalidArgument("label out of range: " + std::to_string(v));
  }
}

}  // namespace

MetricsRow compute_metrics(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) throw DimensionError("y_true and y_pred differ in length");
  if (y_true.empty()) throw InvalidArgument("no samples");
  check_labels(y_true);
  check_labels(y_pred);
  MetricsRow m;
  for (std::size_t i = 0; i < y_true.size(); ++i) ++m.confusion[y_true[i]][y_pred[i]];
  std::size_t correct = 0;
  double p_sum = 0.0, r_sum = 0.0, f_sum = 0.0;
  for (int c = 0; c < kNumClasses; ++c) {
    correct += m.confusion[c][c];
    double tp = static_cast<double>(m.confusion[c][c]);
    double predicted = 0.0, actual = 0.0;
    for (int k = 0; k < kNumClasses; ++k) {
      predicted += static_cast<double>(m.confusion[k][c]);
      actual += static_cast<double>(m.confusion[c][k]);
    }
    double precision = predicted > 0.0 ? tp / predicted : 0.0;
    double recall = actual > 0.0 ? tp / actual : 0.0;
    double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    m.f1[c] = f1;
    p_sum += precision;
    r_sum += recall;
    f_sum += f1;
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(y_true.size());
  m.macro_precision = p_sum / kNumClasses;
  m.macro_recall = r_sum / kNumClasses;
  m.macro_f1 = f_sum / kNumClasses;
  return m;
}

double macro_f1(std::span<const int> y_true, std::span<const int> y_pred) {
  return compute_metrics(y_true, y_pred).macro_f1;
}

double binary_auroc(const std::vector<bool>& positive, std::span<const double> scores) {
  if (positive.size() != scores.size()) throw DimensionError("labels and scores differ in length");
  // Rank-sum form: average ranks give ties half credit.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(scores.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  double n_pos = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < positive.size(); ++i) {
    if (positive[i]) {
      n_pos += 1.0;
      rank_sum += rank[i];
    }
  }
  double n_neg = static_cast<double>(positive.size()) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) throw InvalidArgument("AUROC needs both positives and negatives");
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

namespace {

void check_rows(std::span<const ClassVector> y_prob) {
  for (const auto& p : y_prob) {
    double s = std::accumulate(p.begin(), p.end(), 0.0);
    if (std::abs(s - 1.0) > 1e-6) throw InvalidArgument("probability row does not sum to 1");
  }
}

void fill_auroc(MetricsRow& m, std::span<const int> y_true, std::span<const ClassVector> y_prob) {
  double total = 0.0;
  int present = 0;
  std::vector<bool> positive(y_true.size());
  std::vector<double> scores(y_true.size());
  for (int c = 0; c < kNumClasses; ++c) {
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
      positive[i] = y_true[i] == c;
      scores[i] = y_prob[i][c];
      n_pos += positive[i] ? 1 : 0;
    }
    if (n_pos == 0 || n_pos == y_true.size()) {
      m.auroc_excluded.push_back(c);
      continue;
    }
    total += binary_auroc(positive, scores);
    ++present;
  }
  m.macro_auroc = present > 0 ? total / present : 0.0;
}

}  // namespace

MetricsRow compute_metrics(std::span<const int> y_true, std::span<const ClassVector> y_prob) {
  if (y_true.size() != y_prob.size()) throw DimensionError("y_true and y_prob differ in length");
  check_rows(y_prob);
  std::vector<int> pred;
  pred.reserve(y_prob.size());
  for (const auto& p : y_prob)
    pred.push_back(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
  MetricsRow m = compute_metrics(y_true, pred);
  fill_auroc(m, y_true, y_prob);
  return m;
}

MetricsRow compute_metrics(std::span<const int> y_true, std::span<const int> y_pred,
                           std::span<const ClassVector> y_prob) {
  if (y_true.size() != y_prob.size()) throw DimensionError("y_true and y_prob differ in length");
  check_rows(y_prob);
  MetricsRow m = compute_metrics(y_true, y_pred);
  fill_auroc(m, y_true, y_prob);
  return m;
}

void write_metrics_csv_header(std::ostream& out) {
  out << "label,accuracy,macro_precision,macro_recall,macro_f1,macro_auroc,f1_normal,f1_caution,"
         "f1_warning,f1_danger\n";
}

void write_metrics_csv_row(std::ostream& out, const std::string& label, const MetricsRow& m) {
  auto old = out.precision(10);
  out << label << ',' << m.accuracy << ',' << m.macro_precision << ',' << m.macro_recall << ','
      << m.macro_f1 << ',' << m.macro_auroc;
  for (double f : m.f1) out << ',' << f;
  out << '\n';
  out.precision(old);
}

}  // namespace cascade

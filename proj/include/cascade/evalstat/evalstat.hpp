#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cascade/core/types.hpp"

namespace cascade {

using ConfusionMatrix = std::array<std::array<std::size_t, kNumClasses>, kNumClasses>;

struct MetricsRow {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double macro_auroc = 0.0;
  ConfusionMatrix confusion{};  // [true][predicted]
  ClassVector f1{};
  // Classes absent from y_true, left out of the AUROC average.
  std::vector<int> auroc_excluded;
};

// Hard-label metrics; AUROC needs scores and is left at 0.
MetricsRow compute_metrics(std::span<const int> y_true, std::span<const int> y_pred);
// Predictions are the row argmax (ties to the lower class). Rows must sum
// to 1 within 1e-6.
MetricsRow compute_metrics(std::span<const int> y_true, std::span<const ClassVector> y_prob);
// Hard metrics from y_pred, AUROC from y_prob (for models whose canonical
// prediction is not the probability argmax).
MetricsRow compute_metrics(std::span<const int> y_true, std::span<const int> y_pred,
                           std::span<const ClassVector> y_prob);

// Mann-Whitney AUROC of `scores` for positives (true) vs negatives; ties
// count 1/2. Throws when either group is empty.
double binary_auroc(const std::vector<bool>& positive, std::span<const double> scores);

double macro_f1(std::span<const int> y_true, std::span<const int> y_pred);

// ---- Student t distribution -------------------------------------------------

// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
double regularized_incomplete_beta(double a, double b, double x);
// P(T <= t) for Student's t with dof degrees of freedom.
double student_t_cdf(double t, double dof);
// Two-sided p-value P(|T| >= |t|).
double student_t_two_sided_p(double t, double dof);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double dof = 0.0;
  double mean_difference = 0.0;
  // Zero sample variance: t is +-inf (p = 0) when the mean differs from the
  // reference and 0 (p = 1) when it does not.
  bool degenerate = false;
};

// Two-sided one-sample test of mean(x) against mu0, n - 1 dof.
TTestResult one_sample_t_test(std::span<const double> x, double mu0);
// Two-sided paired test on d_i = a_i - b_i.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

struct EffectSize {
  double d = 0.0;
  bool degenerate = false;  // zero sd with a nonzero mean difference
};

// Paired: mean(a - b) / sd(a - b). Pooled: (mean a - mean b) / s_pooled with
// s_pooled^2 = ((na-1) sa^2 + (nb-1) sb^2) / (na + nb - 2). Sample sds.
EffectSize cohens_d(std::span<const double> a, std::span<const double> b, bool paired);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

using Statistic = std::function<double(std::span<const double>)>;

// Percentile bootstrap: statistic over n_resamples resamples with
// replacement, interval from the (1-level)/2 and (1+level)/2 quantiles.
Interval bootstrap_ci(std::span<const double> values, std::uint64_t seed,
                      std::size_t n_resamples = 1000, double level = 0.95,
                      const Statistic& statistic = {});

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

struct SignificanceRow {
  std::string comparison;  // "a vs b"
  double mean_a = 0.0;
  double mean_b = 0.0;
  double delta = 0.0;  // mean_a - mean_b
  double t_statistic = 0.0;
  double p_value = 1.0;
  double cohens_d_paired = 0.0;
  double cohens_d_pooled = 0.0;
  double ci_low = 0.0;  // bootstrap CI of the mean paired difference
  double ci_high = 0.0;
  bool degenerate = false;
};

// Per-seed scores a and b, paired by seed.
SignificanceRow compare_paired(const std::string& name_a, std::span<const double> a,
                               const std::string& name_b, std::span<const double> b,
                               std::uint64_t seed = 0);

void write_significance_csv(std::ostream& out, std::span<const SignificanceRow> rows);
void write_metrics_csv_header(std::ostream& out);
void write_metrics_csv_row(std::ostream& out, const std::string& label, const MetricsRow& m);

}  // namespace cascade

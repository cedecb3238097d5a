#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cascade/common/error.hpp"
#include "cascade/common/math.hpp"
#include "cascade/common/rng.hpp"
#include "cascade/evalstat/evalstat.hpp"

namespace cascade {

namespace {

// Continued fraction for I_x(a, b), modified Lentz.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw Error("incomplete beta continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0) throw InvalidArgument("incomplete beta needs a, b > 0");
  if (x < 0.0 || x > 1.0) throw InvalidArgument("incomplete beta needs x in [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double front =
      std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
               b * std::log1p(-x));
  // The fraction converges fast for x < (a + 1) / (a + b + 2); use the
  // symmetry I_x(a, b) = 1 - I_{1-x}(b, a) otherwise.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double dof) {
  if (dof <= 0.0) throw InvalidArgument("t distribution needs dof > 0");
  if (std::isnan(t)) throw InvalidArgument("t statistic is NaN");
  if (std::isinf(t)) return 0.0;
  return regularized_incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t));
}

double student_t_cdf(double t, double dof) {
  double tail = student_t_two_sided_p(t, dof) / 2.0;
  return t >= 0.0 ? 1.0 - tail : tail;
}

TTestResult one_sample_t_test(std::span<const double> x, double mu0) {
  if (x.size() < 2) throw InvalidArgument("t-test needs at least 2 values");
  TTestResult r;
  r.dof = static_cast<double>(x.size() - 1);
  const double m = mean_of(x);
  r.mean_difference = m - mu0;
  const double sd = sample_std_of(x);
  if (sd == 0.0) {
    r.degenerate = true;
    if (r.mean_difference == 0.0) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = std::copysign(std::numeric_limits<double>::infinity(), r.mean_difference);
      r.p = 0.0;
    }
    return r;
  }
  r.t = r.mean_difference / (sd / std::sqrt(static_cast<double>(x.size())));
  r.p = student_t_two_sided_p(r.t, r.dof);
  return r;
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("paired samples differ in length");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return one_sample_t_test(d, 0.0);
}

EffectSize cohens_d(std::span<const double> a, std::span<const double> b, bool paired) {
  if (a.size() < 2 || b.size() < 2) throw InvalidArgument("Cohen's d needs at least 2 values");
  double diff = 0.0, sd = 0.0;
  if (paired) {
    if (a.size() != b.size()) throw DimensionError("paired samples differ in length");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    diff = mean_of(d);
    sd = sample_std_of(d);
  } else {
    diff = mean_of(a) - mean_of(b);
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double sa = sample_std_of(a), sb = sample_std_of(b);
    sd = std::sqrt(((na - 1.0) * sa * sa + (nb - 1.0) * sb * sb) / (na + nb - 2.0));
  }
  if (sd == 0.0) return {0.0, diff != 0.0};
  return {diff / sd, false};
}

Interval bootstrap_ci(std::span<const double> values, std::uint64_t seed, std::size_t n_resamples,
                      double level, const Statistic& statistic) {
  if (values.size() < 2) throw InvalidArgument("bootstrap needs at least 2 values");
  if (n_resamples == 0) throw InvalidArgument("bootstrap needs resamples");
  if (level <= 0.0 || level >= 1.0) throw InvalidArgument("confidence level must lie in (0, 1)");
  const Statistic stat = statistic ? statistic : Statistic([](std::span<const double> v) { return mean_of(v); });
  Rng rng = make_rng(seed, 0xb0075);
  std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
  std::vector<double> resample(values.size());
  std::vector<double> stats(n_resamples);
  for (auto& s : stats) {
    for (auto& v : resample) v = values[pick(rng)];
    s = stat(resample);
  }
  std::sort(stats.begin(), stats.end());
  const double alpha = (1.0 - level) / 2.0;
  return {quantile_sorted(stats, alpha), quantile_sorted(stats, 1.0 - alpha)};
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> rank(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("spearman: lengths differ");
  if (x.size() < 2) throw InvalidArgument("spearman needs at least 2 pairs");
  auto rx = average_ranks(x), ry = average_ranks(y);
  const double mx = mean_of(rx), my = mean_of(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

SignificanceRow compare_paired(const std::string& name_a, std::span<const double> a,
                               const std::string& name_b, std::span<const double> b,
                               std::uint64_t seed) {
  SignificanceRow row;
  row.comparison = name_a + " vs " + name_b;
  row.mean_a = mean_of(a);
  row.mean_b = mean_of(b);
  row.delta = row.mean_a - row.mean_b;
  auto t = paired_t_test(a, b);
  row.t_statistic = t.t;
  row.p_value = t.p;
  row.degenerate = t.degenerate;
  row.cohens_d_paired = cohens_d(a, b, true).d;
  row.cohens_d_pooled = cohens_d(a, b, false).d;
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  auto ci = bootstrap_ci(d, seed);
  row.ci_low = ci.low;
  row.ci_high = ci.high;
  return row;
}

void write_significance_csv(std::ostream& out, std::span<const SignificanceRow> rows) {
  auto old = out.precision(10);
  out << "comparison,f1_a,f1_b,delta_f1,t,p_value,cohens_d_paired,cohens_d_pooled,ci_low,ci_high,"
         "degenerate\n";
  for (const auto& r : rows) {
    out << r.comparison << ',' << r.mean_a << ',' << r.mean_b << ',' << r.delta << ','
        << r.t_statistic << ',' << r.p_value << ',' << r.cohens_d_paired << ','
        << r.cohens_d_pooled << ',' << r.ci_low << ',' << r.ci_high << ','
        << (r.degenerate ? 1 : 0) << '\n';
  }
  out.precision(old);
}

}  // namespace cascade

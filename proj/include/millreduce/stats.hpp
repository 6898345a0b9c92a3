#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "millreduce/dataset.hpp"
#include "millreduce/trainer.hpp"

namespace millreduce {

// ---------------------------------------------------------------------------
// Distribution tails via the regularized incomplete beta function.

// I_x(a, b) by the modified Lentz continued fraction, switching to the
// symmetric form 1 - I_{1-x}(b, a) when x is past (a+1)/(a+b+2) so the
// fraction always converges fast. Accurate to ~1e-14 over the df ranges
// used here; an independent quadrature oracle in the tests pins this down.
inline double reg_inc_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("reg_inc_beta: a, b must be positive");
  if (x < 0.0 || x > 1.0) throw std::invalid_argument("reg_inc_beta: x outside [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;

  const bool swap = x >= (a + 1.0) / (a + b + 2.0);
  if (swap) {
    std::swap(a, b);
    x = 1.0 - x;
  }

  // Continued fraction for the unswapped orientation.
  const double ln_front = a * std::log(x) + b * std::log1p(-x) -
                          (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b)) - std::log(a);
  constexpr double tiny = 1e-300;
  constexpr double eps = 3e-16;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double f = d;
  for (int m = 1; m <= 500; ++m) {
    const double md = static_cast<double>(m);
    double num = md * (b - md) * x / ((a + 2.0 * md - 1.0) * (a + 2.0 * md));
    d = 1.0 + num * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    f *= d * c;
    num = -(a + md) * (a + b + md) * x / ((a + 2.0 * md) * (a + 2.0 * md + 1.0));
    d = 1.0 + num * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    f *= delta;
    if (std::fabs(delta - 1.0) < eps) break;
  }
  const double result = std::exp(ln_front) * f;
  return swap ? 1.0 - std::min(1.0, result) : std::min(1.0, result);
}

// Two-sided Student-t p-value with (possibly fractional) df.
inline double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("student_t_two_sided_p: df must be positive");
  if (!std::isfinite(t)) return 0.0;
  const double x = df / (df + t * t);
  return reg_inc_beta(0.5 * df, 0.5, x);
}

// Upper-tail F p-value, P(F_{d1,d2} >= f), for f >= 0.
inline double f_upper_p(double f, double d1, double d2) {
  if (!(d1 > 0.0) || !(d2 > 0.0)) throw std::invalid_argument("f_upper_p: df must be positive");
  if (!std::isfinite(f)) return 0.0;
  if (f <= 0.0) return 1.0;
  return reg_inc_beta(0.5 * d2, 0.5 * d1, d2 / (d2 + d1 * f));
}

// ---------------------------------------------------------------------------
// Two-sample hypothesis tests at a fixed confidence level.

struct TestOutcome {
  double statistic = 0.0;
  double df1 = 0.0;
  double df2 = 0.0;  // 0 when the test has a single df
  double p_value = 1.0;
  double confidence = 0.99;
  bool reject_h0 = false;
};

// Welch two-sample t test (equal means, two-sided). Welch rather than the
// pooled variant because the accompanying F tests routinely find unequal
// variances on these residual samples.
inline TestOutcome t_test_two_sample(std::span<const double> a, std::span<const double> b,
                                     double confidence = 0.99) {
  if (a.size() < 2 || b.size() < 2)
    throw std::invalid_argument("t_test_two_sample: each sample needs >= 2 points");
  const double n1 = static_cast<double>(a.size()), n2 = static_cast<double>(b.size());
  const double m1 = mean(a), m2 = mean(b);
  const double s1 = stddev(a), s2 = stddev(b);
  const double q1 = s1 * s1 / n1, q2 = s2 * s2 / n2;

  TestOutcome out;
  out.confidence = confidence;
  if (q1 + q2 == 0.0) {
    out.statistic = 0.0;
    out.df1 = n1 + n2 - 2.0;
    out.p_value = m1 == m2 ? 1.0 : 0.0;
    out.reject_h0 = out.p_value < 1.0 - confidence;
    return out;
  }
  out.statistic = (m1 - m2) / std::sqrt(q1 + q2);
  out.df1 = (q1 + q2) * (q1 + q2) /
            (q1 * q1 / (n1 - 1.0) + q2 * q2 / (n2 - 1.0));
  out.p_value = student_t_two_sided_p(out.statistic, out.df1);
  out.reject_h0 = out.p_value < 1.0 - confidence;
  return out;
}

// Fisher F test on the variance ratio, larger variance in the numerator
// (so the statistic is always >= 1), one-sided.
inline TestOutcome f_test_two_sample(std::span<const double> a, std::span<const double> b,
                                     double confidence = 0.99) {
  if (a.size() < 2 || b.size() < 2)
    throw std::invalid_argument("f_test_two_sample: each sample needs >= 2 points");
  const double s1 = stddev(a), s2 = stddev(b);
  const double v1 = s1 * s1, v2 = s2 * s2;
  if (v1 == 0.0 && v2 == 0.0)
    throw std::invalid_argument("f_test_two_sample: both variances are zero");

  TestOutcome out;
  out.confidence = confidence;
  const bool a_max = v1 >= v2;
  const double v_max = a_max ? v1 : v2, v_min = a_max ? v2 : v1;
  const double n_max = static_cast<double>(a_max ? a.size() : b.size());
  const double n_min = static_cast<double>(a_max ? b.size() : a.size());
  out.df1 = n_max - 1.0;
  out.df2 = n_min - 1.0;
  if (v_min == 0.0) {
    out.statistic = std::numeric_limits<double>::infinity();
    out.p_value = 0.0;
  } else {
    out.statistic = v_max / v_min;
    out.p_value = f_upper_p(out.statistic, out.df1, out.df2);
  }
  out.reject_h0 = out.p_value < 1.0 - confidence;
  return out;
}

// ---------------------------------------------------------------------------
// Residual summaries in the shape of the study's tables.

struct TrialResiduals {
  std::vector<double> learn;
  std::vector<double> val;
};

// Aggregates of one per-trial statistic: its mean, spread and extremes
// across trials, plus the smallest magnitude (the "(abs)" table row).
struct StatAggregate {
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double abs_min = 0.0;
  double max = 0.0;
};

struct SummaryTable {
  StatAggregate learn_mean, learn_std, val_mean, val_std;
  std::size_t n_trials = 0;
};

inline StatAggregate aggregate_stat(std::span<const double> per_trial) {
  StatAggregate a;
  a.mean = mean(per_trial);
  a.std = stddev(per_trial);
  a.min = *std::min_element(per_trial.begin(), per_trial.end());
  a.max = *std::max_element(per_trial.begin(), per_trial.end());
  a.abs_min = std::fabs(per_trial[0]);
  for (double v : per_trial) a.abs_min = std::min(a.abs_min, std::fabs(v));
  return a;
}

inline SummaryTable summary_table(std::span<const TrialResiduals> trials) {
  if (trials.empty()) throw std::invalid_argument("summary_table: no trials");
  std::vector<double> lm, ls, vm, vs;
  for (const TrialResiduals& t : trials) {
    if (t.learn.empty() || t.val.empty())
      throw std::invalid_argument("summary_table: empty residual set");
    lm.push_back(mean(t.learn));
    ls.push_back(stddev(t.learn));
    vm.push_back(mean(t.val));
    vs.push_back(stddev(t.val));
  }
  SummaryTable tab;
  tab.n_trials = trials.size();
  tab.learn_mean = aggregate_stat(lm);
  tab.learn_std = aggregate_stat(ls);
  tab.val_mean = aggregate_stat(vm);
  tab.val_std = aggregate_stat(vs);
  return tab;
}

// Pearson correlation; a zero-variance side yields 0 (flagged by caller
// convention as "no signal" rather than an error).
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("pearson: need two aligned samples of >= 2");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

struct CorrelationTable {
  std::vector<std::string> inputs;
  std::vector<StatAggregate> per_input;  // aggregates of |r| across trials
};

// |Pearson r| between every input column and the residual vector, per trial,
// aggregated across trials. Uses the raw encoded columns: an input pruned
// from some trial's model keeps its column and lands near zero correlation.
inline CorrelationTable correlation_table(const Dataset& data,
                                          std::span<const std::vector<double>> residuals_per_trial) {
  if (residuals_per_trial.empty())
    throw std::invalid_argument("correlation_table: no trials");
  CorrelationTable tab;
  tab.inputs = data.column_names;
  std::vector<double> column(data.n_rows);
  std::vector<double> abs_r(residuals_per_trial.size());
  for (std::size_t j = 0; j < data.n_cols; ++j) {
    for (std::size_t i = 0; i < data.n_rows; ++i) column[i] = data.at(i, j);
    for (std::size_t t = 0; t < residuals_per_trial.size(); ++t) {
      if (residuals_per_trial[t].size() != data.n_rows)
        throw std::invalid_argument("correlation_table: residual length mismatch");
      abs_r[t] = std::fabs(pearson(column, residuals_per_trial[t]));
    }
    tab.per_input.push_back(aggregate_stat(abs_r));
  }
  return tab;
}

// Fraction of trials whose mean residual magnitude is below the threshold.
inline double frac_mean_below(std::span<const double> trial_means, double threshold = 30.0) {
  if (trial_means.empty()) throw std::invalid_argument("frac_mean_below: empty input");
  std::size_t n = 0;
  for (double m : trial_means) n += std::fabs(m) < threshold;
  return static_cast<double>(n) / static_cast<double>(trial_means.size());
}

}  // namespace millreduce

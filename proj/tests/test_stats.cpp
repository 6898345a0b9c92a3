#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "millreduce/stats.hpp"
#include "oracles.hpp"

using namespace millreduce;

TEST_CASE("summary table for a single (1, -1) trial") {
  TrialResiduals t;
  t.learn = {1.0, -1.0};
  t.val = {1.0, -1.0};
  const auto tab = summary_table(std::vector<TrialResiduals>{t});
  REQUIRE(tab.learn_mean.mean == 0.0);
  REQUIRE(tab.learn_std.mean == Catch::Approx(std::sqrt(2.0)).epsilon(1e-14));
  REQUIRE(tab.val_std.mean == Catch::Approx(std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("summary aggregates: min, abs-min, max") {
  std::vector<TrialResiduals> trials;
  for (double m : {-5.0, 2.0, 9.0}) {
    TrialResiduals t;
    t.learn = {m, m};
    t.val = {m, m};
    trials.push_back(t);
  }
  const auto tab = summary_table(trials);
  REQUIRE(tab.learn_mean.min == -5.0);
  REQUIRE(tab.learn_mean.abs_min == 2.0);
  REQUIRE(tab.learn_mean.max == 9.0);
  REQUIRE(tab.learn_mean.mean == Catch::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("summary table matches an independent two-pass aggregation") {
  Rng rng(2718);
  std::vector<TrialResiduals> trials(30);
  for (auto& t : trials) {
    t.learn.resize(50);
    t.val.resize(25);
    for (auto& v : t.learn) v = rng.uniform(-100.0, 100.0);
    for (auto& v : t.val) v = rng.uniform(-100.0, 100.0);
  }
  const auto tab = summary_table(trials);

  // Oracle: collect per-trial means the plain way, then aggregate them.
  std::vector<double> means;
  for (const auto& t : trials) {
    double s = 0;
    for (double v : t.learn) s += v;
    means.push_back(s / static_cast<double>(t.learn.size()));
  }
  double m = 0;
  for (double v : means) m += v;
  m /= static_cast<double>(means.size());
  double var = 0;
  for (double v : means) var += (v - m) * (v - m);
  var /= static_cast<double>(means.size() - 1);
  double lo = means[0], hi = means[0], ab = std::fabs(means[0]);
  for (double v : means) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    ab = std::min(ab, std::fabs(v));
  }
  REQUIRE(tab.learn_mean.mean == Catch::Approx(m).epsilon(1e-12));
  REQUIRE(tab.learn_mean.std == Catch::Approx(std::sqrt(var)).epsilon(1e-12));
  REQUIRE(tab.learn_mean.min == lo);
  REQUIRE(tab.learn_mean.max == hi);
  REQUIRE(tab.learn_mean.abs_min == ab);
}

TEST_CASE("summary table rejects degenerate inputs") {
  REQUIRE_THROWS_AS(summary_table(std::vector<TrialResiduals>{}), std::invalid_argument);
  TrialResiduals t;
  t.learn = {};
  t.val = {1.0};
  REQUIRE_THROWS_AS(summary_table(std::vector<TrialResiduals>{t}), std::invalid_argument);
}

TEST_CASE("pearson correlation: exact, independent, and hand-computed cases") {
  std::vector<double> x = {1.0, 2.0, 3.0, 4.0, 5.0};
  REQUIRE(pearson(x, x) == Catch::Approx(1.0).epsilon(1e-14));
  std::vector<double> neg = {5.0, 4.0, 3.0, 2.0, 1.0};
  REQUIRE(pearson(x, neg) == Catch::Approx(-1.0).epsilon(1e-14));

  // Textbook formula on a fixed 5-point pair, computed step by step.
  std::vector<double> y = {2.0, 1.0, 4.0, 3.0, 7.0};
  const double mx = 3.0, my = 3.4;
  double sxy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < 5; ++i) {
    sxy += (x[static_cast<std::size_t>(i)] - mx) * (y[static_cast<std::size_t>(i)] - my);
    sxx += (x[static_cast<std::size_t>(i)] - mx) * (x[static_cast<std::size_t>(i)] - mx);
    syy += (y[static_cast<std::size_t>(i)] - my) * (y[static_cast<std::size_t>(i)] - my);
  }
  REQUIRE(pearson(x, y) == Catch::Approx(sxy / std::sqrt(sxx * syy)).epsilon(1e-14));

  // Independent draws decorrelate.
  Rng rng(31415);
  std::vector<double> a(10000), b(10000);
  for (auto& v : a) v = rng.uniform(-1.0, 1.0);
  for (auto& v : b) v = rng.uniform(-1.0, 1.0);
  REQUIRE(std::fabs(pearson(a, b)) < 0.05);

  // Zero variance yields 0 by convention.
  std::vector<double> flat(5, 2.0);
  REQUIRE(pearson(flat, y) == 0.0);
}

TEST_CASE("correlation table shapes and pruned-input behavior") {
  Dataset d;
  d.n_rows = 200;
  d.n_cols = 2;
  d.column_names = {"signal", "noise"};
  d.column_kinds.assign(2, ColumnKind::Continuous);
  d.x.resize(400);
  d.y.resize(200);
  Rng rng(999);
  std::vector<std::vector<double>> residuals(3, std::vector<double>(200));
  for (std::size_t i = 0; i < 200; ++i) {
    d.x[i * 2] = rng.uniform(-1.0, 1.0);
    d.x[i * 2 + 1] = rng.uniform(-1.0, 1.0);
    for (auto& r : residuals) r[i] = d.x[i * 2] + 0.01 * oracles::gaussian(rng);
  }
  const auto tab = correlation_table(d, residuals);
  REQUIRE(tab.inputs == d.column_names);
  REQUIRE(tab.per_input.size() == 2);
  REQUIRE(tab.per_input[0].mean > 0.99);  // residual tracks the signal column
  REQUIRE(tab.per_input[1].mean < 0.2);   // the unused column decorrelates
  for (const auto& agg : tab.per_input) {
    REQUIRE(agg.min >= 0.0);
    REQUIRE(agg.max <= 1.0);
  }
}

TEST_CASE("t test: identical samples do not reject") {
  std::vector<double> a = {1.0, 2.0, 3.0, 4.0};
  const auto out = t_test_two_sample(a, a);
  REQUIRE(out.statistic == 0.0);
  REQUIRE(out.p_value == 1.0);
  REQUIRE_FALSE(out.reject_h0);
}

TEST_CASE("t test: a five-sigma separation rejects at 99%") {
  Rng rng(8);
  std::vector<double> a(500), b(500);
  for (auto& v : a) v = oracles::gaussian(rng);
  for (auto& v : b) v = 5.0 + oracles::gaussian(rng);
  const auto out = t_test_two_sample(a, b);
  REQUIRE(out.reject_h0);
  REQUIRE(out.p_value < 1e-6);
}

TEST_CASE("t test p-values match the quadrature oracle") {
  const std::vector<double> a = {0.5, 1.25, -0.75, 2.0, 0.25, -1.5, 0.875, 1.125};
  const std::vector<double> b = {1.0, 2.5, 0.5, 3.25, 1.75, -0.25, 2.125, 0.625};
  const auto out = t_test_two_sample(a, b);
  const double oracle = oracles::quad_t_two_sided_p(out.statistic, out.df1);
  REQUIRE(out.p_value == Catch::Approx(oracle).epsilon(0).margin(1e-6));
}

TEST_CASE("t test label-swap and shift invariances hold exactly") {
  // Dyadic values and shifts keep every intermediate exactly representable.
  const std::vector<double> a = {0.5, 1.25, -0.75, 2.0, 0.25, -1.5, 0.875, 1.125};
  const std::vector<double> b = {1.0, 2.5, 0.5, 3.25, 1.75, -0.25, 2.125, 0.625};
  const auto ab = t_test_two_sample(a, b);
  const auto ba = t_test_two_sample(b, a);
  REQUIRE(ab.p_value == ba.p_value);
  REQUIRE(ab.statistic == -ba.statistic);
  REQUIRE(ab.df1 == ba.df1);

  std::vector<double> a8 = a, b8 = b;
  for (auto& v : a8) v += 8.0;
  for (auto& v : b8) v += 8.0;
  const auto shifted = t_test_two_sample(a8, b8);
  REQUIRE(shifted.statistic == ab.statistic);
  REQUIRE(shifted.p_value == ab.p_value);
}

TEST_CASE("t test rejects undersized samples") {
  std::vector<double> one = {1.0};
  std::vector<double> two = {1.0, 2.0};
  REQUIRE_THROWS_AS(t_test_two_sample(one, two), std::invalid_argument);
}

TEST_CASE("F test: identical samples give F = 1 and no rejection") {
  std::vector<double> a = {1.0, 2.0, 3.0, 4.0, 5.0};
  const auto out = f_test_two_sample(a, a);
  REQUIRE(out.statistic == 1.0);
  REQUIRE_FALSE(out.reject_h0);
}

TEST_CASE("F test: a 9x variance ratio rejects at 99%") {
  Rng rng(21);
  std::vector<double> a(300), b(300);
  for (auto& v : a) v = oracles::gaussian(rng);
  for (auto& v : b) v = 3.0 * oracles::gaussian(rng);
  const auto out = f_test_two_sample(a, b);
  REQUIRE(out.statistic > 1.0);
  REQUIRE(out.reject_h0);
}

TEST_CASE("F test p-values match the quadrature oracle") {
  const std::vector<double> a = {0.5, 1.25, -0.75, 2.0, 0.25, -1.5};
  const std::vector<double> b = {2.0, 5.5, -3.0, 6.5, 3.5, -0.5, 4.25};
  const auto out = f_test_two_sample(a, b);
  const double oracle = oracles::quad_f_upper_p(out.statistic, out.df1, out.df2);
  REQUIRE(out.p_value == Catch::Approx(oracle).epsilon(0).margin(1e-6));
}

TEST_CASE("F test label-swap and scale invariances hold exactly") {
  const std::vector<double> a = {0.5, 1.25, -0.75, 2.0, 0.25, -1.5};
  const std::vector<double> b = {2.0, 5.5, -3.0, 6.5, 3.5, -0.5, 4.25};
  const auto ab = f_test_two_sample(a, b);
  const auto ba = f_test_two_sample(b, a);
  REQUIRE(ab.statistic == ba.statistic);
  REQUIRE(ab.p_value == ba.p_value);
  REQUIRE(ab.df1 == ba.df1);
  REQUIRE(ab.df2 == ba.df2);

  std::vector<double> a2 = a, b2 = b;
  for (auto& v : a2) v *= 2.0;
  for (auto& v : b2) v *= 2.0;
  const auto scaled = f_test_two_sample(a2, b2);
  REQUIRE(scaled.statistic == ab.statistic);
  REQUIRE(scaled.p_value == ab.p_value);
}

TEST_CASE("F test rejects twin zero variances") {
  std::vector<double> flat = {2.0, 2.0, 2.0};
  REQUIRE_THROWS_AS(f_test_two_sample(flat, flat), std::invalid_argument);
}

TEST_CASE("incomplete beta agrees with quadrature on a parameter grid") {
  for (double a : {0.5, 1.0, 2.5, 10.0, 150.0}) {
    for (double b : {0.5, 1.0, 4.0, 40.0}) {
      for (double x : {0.01, 0.2, 0.5, 0.8, 0.99}) {
        const double mine = reg_inc_beta(a, b, x);
        const double ref = oracles::quad_reg_inc_beta(a, b, x);
        REQUIRE(mine == Catch::Approx(ref).epsilon(0).margin(1e-9));
      }
    }
  }
  REQUIRE(reg_inc_beta(2.0, 3.0, 0.0) == 0.0);
  REQUIRE(reg_inc_beta(2.0, 3.0, 1.0) == 1.0);
}

TEST_CASE("frac_mean_below counts strict magnitudes") {
  const std::vector<double> means = {10.0, -40.0, 29.9, 31.0};
  REQUIRE(frac_mean_below(means, 30.0) == 0.5);
  const std::vector<double> zeros(5, 0.0);
  REQUIRE(frac_mean_below(zeros, 30.0) == 1.0);

  Rng rng(65);
  std::vector<double> thirty(30);
  for (auto& v : thirty) v = rng.uniform(-60.0, 60.0);
  std::size_t count = 0;
  for (double v : thirty) count += std::fabs(v) < 30.0;
  REQUIRE(frac_mean_below(thirty, 30.0) ==
          Catch::Approx(static_cast<double>(count) / 30.0).epsilon(1e-14));
  REQUIRE_THROWS_AS(frac_mean_below(std::vector<double>{}, 30.0), std::invalid_argument);
}

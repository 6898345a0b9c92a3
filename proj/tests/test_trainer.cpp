#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "millreduce/encoding.hpp"
#include "millreduce/trainer.hpp"
#include "oracles.hpp"

using namespace millreduce;

namespace {

Dataset make_dataset(const std::vector<std::vector<double>>& rows, const std::vector<double>& y) {
  Dataset d;
  d.n_rows = rows.size();
  d.n_cols = rows.empty() ? 0 : rows[0].size();
  d.column_names.assign(d.n_cols, "x");
  d.column_kinds.assign(d.n_cols, ColumnKind::Continuous);
  for (const auto& r : rows) d.x.insert(d.x.end(), r.begin(), r.end());
  d.y = y;
  return d;
}

// Random inputs in [-1,1]^k with targets from a generator network.
Dataset generated_dataset(const MlpParams& gen, std::size_t n, std::uint64_t seed,
                          double noise_sigma) {
  Rng rng(seed);
  Dataset d;
  d.n_rows = n;
  d.n_cols = static_cast<std::size_t>(gen.n_inputs);
  d.column_names.assign(d.n_cols, "x");
  d.column_kinds.assign(d.n_cols, ColumnKind::Continuous);
  d.x.resize(n * d.n_cols);
  d.y.resize(n);
  std::vector<double> scratch;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d.n_cols; ++j) d.x[i * d.n_cols + j] = rng.uniform(-1.0, 1.0);
    d.y[i] = forward(gen, d.row(i), scratch) + noise_sigma * oracles::gaussian(rng);
  }
  return d;
}

MlpParams bias_only_net() {
  MlpParams p;
  p.n_inputs = 1;
  p.n_hidden = 1;
  p.hidden_weights = {0.0};
  p.hidden_biases = {0.0};
  p.output_weights = {0.0};
  p.output_bias = 0.0;
  p.active_mask.assign(4, 0);
  p.active_mask[3] = 1;  // only the output bias is trainable
  return p;
}

}  // namespace

TEST_CASE("residuals of a zero network") {
  MlpParams p = nguyen_widrow_init(2, 2, 1);
  for (auto& w : p.hidden_weights) w = 0.0;
  for (auto& b : p.hidden_biases) b = 0.0;
  for (auto& w : p.output_weights) w = 0.0;
  p.output_bias = 0.0;
  Dataset d = make_dataset({{0.1, 0.2}, {0.3, 0.4}}, {0.0, 0.0});
  auto r = residuals(p, d);
  REQUIRE(r == std::vector<double>{0.0, 0.0});

  p.output_bias = 2.5;
  d.y = {3.0, -1.0};
  r = residuals(p, d);
  REQUIRE(r[0] == Catch::Approx(0.5).margin(1e-15));
  REQUIRE(r[1] == Catch::Approx(-3.5).margin(1e-15));
}

TEST_CASE("residuals de-scale back to target units") {
  const MlpParams p = nguyen_widrow_init(2, 3, 5);
  Dataset raw = make_dataset({{0.3, -0.1}, {0.5, 0.9}, {-0.7, 0.2}, {0.1, 0.4}, {0.8, -0.6}},
                             {120.0, 340.0, 95.0, 210.0, 410.0});
  auto [scaled, scaler] = fit_apply_scaler(raw);

  const auto r = residuals(p, scaled);
  std::vector<double> scratch;
  for (std::size_t i = 0; i < scaled.n_rows; ++i) {
    const double manual = (scaled.y[i] - forward(p, scaled.row(i), scratch)) * scaler.target_std;
    REQUIRE(r[i] == Catch::Approx(manual).epsilon(0).margin(1e-12));
  }
}

TEST_CASE("robust weights: degenerate scale gives unit weights") {
  const std::vector<double> r(10, 3.25);
  const auto w = robust_sample_weights(r);
  for (double v : w) REQUIRE(v == 1.0);
}

TEST_CASE("robust weights: the outlier is crushed") {
  const std::vector<double> r = {0.1, -0.1, 0.1, -0.1, 100.0};
  const auto w = robust_sample_weights(r);
  // Derived by hand: median 0.1, MAD 0.2, s = 0.2/0.6745, cutoff = 1.345 s.
  const double s = 0.2 / 0.6745;
  const double cutoff = 1.345 * s;
  for (int i = 0; i < 4; ++i) REQUIRE(w[static_cast<std::size_t>(i)] == 1.0);
  REQUIRE(w[4] == Catch::Approx(cutoff / 100.0).epsilon(1e-12));
  REQUIRE(w[4] < 0.05);
}

TEST_CASE("robust weights are scale-equivariant") {
  Rng rng(77);
  std::vector<double> r(25);
  for (auto& v : r) v = rng.uniform(-2.0, 2.0);
  r[7] = 40.0;
  const auto w1 = robust_sample_weights(r);
  for (auto& v : r) v *= 3.0;
  const auto w2 = robust_sample_weights(r);
  for (std::size_t i = 0; i < r.size(); ++i)
    REQUIRE(w1[i] == Catch::Approx(w2[i]).epsilon(0).margin(1e-12));
}

TEST_CASE("robust weights reject empty input") {
  REQUIRE_THROWS_AS(robust_sample_weights(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("lm iteration on exactly-fitting data accepts a null step") {
  const MlpParams gen = nguyen_widrow_init(3, 2, 21);
  const Dataset d = generated_dataset(gen, 30, 4, 0.0);
  const std::vector<double> w(d.n_rows, 1.0);
  const auto step = lm_iteration(gen, d, 1e-2, w);
  REQUIRE(step.accepted);
  REQUIRE(step.cost_after == Catch::Approx(0.0).margin(1e-20));
  REQUIRE(step.step_norm == Catch::Approx(0.0).margin(1e-10));
}

TEST_CASE("lm step approaches the Marquardt-scaled gradient as damping grows") {
  const MlpParams gen = nguyen_widrow_init(3, 3, 33);
  MlpParams start = nguyen_widrow_init(3, 3, 44);
  const Dataset d = generated_dataset(gen, 60, 6, 0.0);
  const std::vector<double> w(d.n_rows, 1.0);

  // Independent normal-equation assembly from the public jacobian.
  const auto active = start.active_indices();
  const std::size_t p = active.size();
  std::vector<double> diag(p, 0.0), grad(p, 0.0);
  std::vector<double> scratch;
  for (std::size_t s = 0; s < d.n_rows; ++s) {
    std::vector<double> jac(p);
    output_jacobian_into(start, d.row(s), active, jac, scratch);
    const double r = d.y[s] - forward(start, d.row(s), scratch);
    for (std::size_t k = 0; k < p; ++k) {
      diag[k] += jac[k] * jac[k];
      grad[k] += jac[k] * r;
    }
  }

  double prev_cos = 0.0;
  for (double damping : {1e2, 1e4, 1e6}) {
    const auto step = lm_iteration(start, d, damping, w);
    std::vector<double> delta(p), scaled_grad(p);
    for (std::size_t k = 0; k < p; ++k) {
      delta[k] = step.candidate.param(active[k]) - start.param(active[k]);
      scaled_grad[k] = diag[k] > 0 ? grad[k] / diag[k] : 0.0;
    }
    double dot = 0, na = 0, nb = 0;
    for (std::size_t k = 0; k < p; ++k) {
      dot += delta[k] * scaled_grad[k];
      na += delta[k] * delta[k];
      nb += scaled_grad[k] * scaled_grad[k];
    }
    const double cos = dot / std::sqrt(na * nb);
    REQUIRE(cos > prev_cos - 1e-12);
    prev_cos = cos;
  }
  REQUIRE(prev_cos > 1.0 - 1e-8);
}

TEST_CASE("lm step equals the closed-form weighted least-squares jump") {
  // Only the output bias is active: y = b2, a one-parameter linear model.
  MlpParams p = bias_only_net();
  Dataset d = make_dataset({{0.0}, {0.0}, {0.0}, {0.0}}, {2.0, 4.0, 6.0, 12.0});
  const std::vector<double> w = {1.0, 2.0, 3.0, 0.5};

  // Closed form: weighted mean of the targets.
  const double target = std::inner_product(w.begin(), w.end(), d.y.begin(), 0.0) /
                        std::accumulate(w.begin(), w.end(), 0.0);

  const double damping = 1e-12;
  const auto step = lm_iteration(p, d, damping, w);
  REQUIRE(step.accepted);
  // The damped solve lands at target/(1 + damping).
  REQUIRE(step.candidate.output_bias == Catch::Approx(target).epsilon(1e-9));
}

TEST_CASE("masked parameters never move during lm iterations") {
  MlpParams start = nguyen_widrow_init(4, 3, 50);
  start.mask_param(start.hw_index(1, 2));
  start.mask_param(start.ow_index(0));
  const MlpParams gen = nguyen_widrow_init(4, 3, 51);
  const Dataset d = generated_dataset(gen, 80, 52, 0.01);

  TrainConfig cfg;
  cfg.max_iterations = 40;
  const auto result = train(start, d, cfg);
  REQUIRE(result.params.hidden_weights[static_cast<std::size_t>(start.hw_index(1, 2))] == 0.0);
  REQUIRE(result.params.output_weights[0] == 0.0);
  REQUIRE(result.params.active_count() == start.active_count());
}

TEST_CASE("train recovers a known generator") {
  const MlpParams gen = nguyen_widrow_init(3, 4, 1234);
  int successes = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset d = generated_dataset(gen, 400, 9000 + seed, 0.01);
    const MlpParams init = nguyen_widrow_init(3, 4, 100 + seed);
    TrainConfig cfg;
    const auto result = train(init, d, cfg);
    if (rmse(residuals(result.params, d)) <= 0.02) ++successes;
  }
  REQUIRE(successes >= 9);
}

TEST_CASE("a single sample is fit to numerical zero") {
  MlpParams init = nguyen_widrow_init(2, 2, 7);
  Dataset d = make_dataset({{0.4, -0.3}}, {0.75});
  TrainConfig cfg;
  cfg.robust = false;
  const auto result = train(init, d, cfg);
  REQUIRE(std::fabs(residuals(result.params, d)[0]) < 1e-6);
}

TEST_CASE("robust training resists gross outliers") {
  const MlpParams gen = nguyen_widrow_init(3, 4, 777);
  int successes = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Dataset clean = generated_dataset(gen, 400, 2000 + seed, 0.01);
    Dataset corrupted = clean;
    Rng pick(3000 + seed);
    for (int k = 0; k < 20; ++k) {  // 5% gross outliers at +50 sigma
      const auto i = static_cast<std::size_t>(pick.raw() % corrupted.n_rows);
      corrupted.y[i] += 0.5;
    }

    const MlpParams init = nguyen_widrow_init(3, 4, 400 + seed);
    TrainConfig robust_cfg;
    TrainConfig plain_cfg;
    plain_cfg.robust = false;

    const auto fit_clean = train(init, clean, plain_cfg);
    const auto fit_robust = train(init, corrupted, robust_cfg);
    const auto fit_plain = train(init, corrupted, plain_cfg);

    // Judge every fit on the clean targets.
    const double rmse_clean = rmse(residuals(fit_clean.params, clean));
    const double rmse_robust = rmse(residuals(fit_robust.params, clean));
    const double rmse_plain = rmse(residuals(fit_plain.params, clean));
    if (rmse_robust <= 2.0 * rmse_clean && rmse_robust < rmse_plain) ++successes;
  }
  REQUIRE(successes >= 8);
}

TEST_CASE("accepted cost sequence decreases strictly with fixed weights") {
  const MlpParams gen = nguyen_widrow_init(3, 3, 60);
  const Dataset d = generated_dataset(gen, 150, 61, 0.05);
  const MlpParams init = nguyen_widrow_init(3, 3, 62);
  TrainConfig cfg;
  cfg.robust = false;
  cfg.max_iterations = 80;
  const auto result = train(init, d, cfg);

  double last = std::numeric_limits<double>::infinity();
  int accepted = 0;
  for (const auto& rec : result.history.records) {
    if (!rec.accepted) continue;
    REQUIRE(rec.cost < last);
    last = rec.cost;
    ++accepted;
  }
  REQUIRE(accepted > 3);
}

TEST_CASE("unit robust weights reproduce the plain SSE cost") {
  const MlpParams gen = nguyen_widrow_init(2, 2, 70);
  const Dataset d = generated_dataset(gen, 50, 71, 0.1);
  const MlpParams p = nguyen_widrow_init(2, 2, 72);
  const auto r = residuals(p, d);
  double sse = 0.0;
  for (double v : r) sse += v * v;
  const std::vector<double> w(d.n_rows, 1.0);
  const auto step = lm_iteration(p, d, 1.0, w);
  REQUIRE(step.cost_before == Catch::Approx(sse).epsilon(1e-12));
}

TEST_CASE("train is deterministic") {
  const MlpParams gen = nguyen_widrow_init(3, 3, 80);
  const Dataset d = generated_dataset(gen, 120, 81, 0.02);
  const MlpParams init = nguyen_widrow_init(3, 3, 82);
  TrainConfig cfg;
  cfg.max_iterations = 60;
  const auto a = train(init, d, cfg);
  const auto b = train(init, d, cfg);
  REQUIRE(a.params.hidden_weights == b.params.hidden_weights);
  REQUIRE(a.params.output_weights == b.params.output_weights);
  REQUIRE(a.params.output_bias == b.params.output_bias);
  REQUIRE(a.history.records.size() == b.history.records.size());
}

TEST_CASE("train rejects bad inputs") {
  const MlpParams init = nguyen_widrow_init(2, 2, 90);
  Dataset empty;
  empty.n_cols = 2;
  empty.column_names = {"a", "b"};
  empty.column_kinds = {ColumnKind::Continuous, ColumnKind::Continuous};
  TrainConfig cfg;
  REQUIRE_THROWS_AS(train(init, empty, cfg), std::invalid_argument);

  TrainConfig bad;
  bad.damping_down = 1.5;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("train history exports as csv") {
  const MlpParams gen = nguyen_widrow_init(2, 2, 95);
  const Dataset d = generated_dataset(gen, 40, 96, 0.05);
  TrainConfig cfg;
  cfg.max_iterations = 10;
  const auto result = train(nguyen_widrow_init(2, 2, 97), d, cfg);
  const std::string csv = result.history.to_csv();
  REQUIRE(csv.rfind("iter,cost,damping,step_norm,accepted\n", 0) == 0);
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') ==
          static_cast<long>(result.history.records.size()) + 1);
}

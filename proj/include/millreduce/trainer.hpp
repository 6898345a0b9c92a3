#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "millreduce/dataset.hpp"
#include "millreduce/linalg.hpp"
#include "millreduce/mlp.hpp"

namespace millreduce {

struct TrainConfig {
  int max_iterations = 200;
  double initial_damping = 1e-2;
  double damping_up = 10.0;
  double damping_down = 0.1;
  double gradient_tolerance = 1e-6;
  double step_tolerance = 1e-8;
  bool robust = true;
  double robust_tuning = 1.345;  // Huber threshold, in MAD-derived sigmas
  // Stop once an accepted step improves the cost by less than this fraction
  // of it. 0 disables the check; the pruner's brief retrains enable it.
  double cost_tolerance = 0.0;

  void validate() const {
    if (max_iterations < 1 || initial_damping <= 0 || gradient_tolerance <= 0 ||
        step_tolerance <= 0 || robust_tuning <= 0)
      throw std::invalid_argument("TrainConfig: all quantities must be positive");
    if (!(damping_up > 1.0) || !(damping_down > 0.0 && damping_down < 1.0))
      throw std::invalid_argument("TrainConfig: need up > 1 > down > 0");
    if (cost_tolerance < 0) throw std::invalid_argument("TrainConfig: negative cost tolerance");
  }
};

struct TrainRecord {
  int iteration = 0;
  double cost = 0.0;  // weighted SSE of the candidate, under that iteration's weights
  double damping = 0.0;
  double step_norm = 0.0;
  bool accepted = false;
};

struct TrainHistory {
  std::vector<TrainRecord> records;
  std::string stop_reason;

  std::string to_csv() const {
    std::ostringstream os;
    os << "iter,cost,damping,step_norm,accepted\n";
    char buf[160];
    for (const TrainRecord& r : records) {
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%d\n", r.iteration, r.cost,
                    r.damping, r.step_norm, r.accepted ? 1 : 0);
      os << buf;
    }
    return os.str();
  }
};

// Residuals target - prediction, de-scaled back to target units (seconds
// for the sawmill data). For an unscaled dataset the scaler is identity.
inline std::vector<double> residuals(const MlpParams& params, const Dataset& data) {
  if (data.n_cols != static_cast<std::size_t>(params.n_inputs))
    throw std::invalid_argument("residuals: dataset width != n_inputs");
  const double unit = data.scaled ? data.scaler.target_std : 1.0;
  std::vector<double> r(data.n_rows);
  std::vector<double> scratch;
  for (std::size_t i = 0; i < data.n_rows; ++i)
    r[i] = (data.y[i] - forward(params, data.row(i), scratch)) * unit;
  return r;
}

inline double rmse(std::span<const double> r) {
  double ss = 0.0;
  for (double v : r) ss += v * v;
  return r.empty() ? 0.0 : std::sqrt(ss / static_cast<double>(r.size()));
}

inline double mean(std::span<const double> r) {
  double s = 0.0;
  for (double v : r) s += v;
  return r.empty() ? 0.0 : s / static_cast<double>(r.size());
}

// Sample standard deviation (n-1).
inline double stddev(std::span<const double> r) {
  if (r.size() < 2) return 0.0;
  const double m = mean(r);
  double ss = 0.0;
  for (double v : r) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(r.size() - 1));
}

namespace detail {
inline double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (n % 2 == 0) {
    auto lo = std::max_element(v.begin(), mid);
    m = 0.5 * (m + *lo);
  }
  return m;
}
}  // namespace detail

// Huber weights with a MAD scale: s = median(|r - median(r)|) / 0.6745,
// w_i = 1 when |r_i| <= k*s, else k*s/|r_i|. A zero scale (at least half
// the residuals identical) returns unit weights.
inline std::vector<double> robust_sample_weights(std::span<const double> residuals,
                                                 double k = 1.345) {
  if (residuals.empty()) throw std::invalid_argument("robust_sample_weights: empty input");
  const double med = detail::median_of({residuals.begin(), residuals.end()});
  std::vector<double> dev(residuals.size());
  for (std::size_t i = 0; i < residuals.size(); ++i) dev[i] = std::fabs(residuals[i] - med);
  const double s = detail::median_of(std::move(dev)) / 0.6745;
  std::vector<double> w(residuals.size(), 1.0);
  if (s <= 0.0) return w;
  const double cutoff = k * s;
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    const double a = std::fabs(residuals[i]);
    if (a > cutoff) w[i] = cutoff / a;
  }
  return w;
}

namespace detail {

// Normal-equation pieces at the current parameters: H = J^T W J (full
// square, symmetric), g = J^T W r, with J = d y_hat / d theta over active
// parameters and r the scaled residuals. Returns the weighted SSE.
struct NormalEq {
  std::vector<double> h;  // p x p
  std::vector<double> g;  // p
  double cost = 0.0;
};

inline double weighted_sse(const MlpParams& params, const Dataset& data,
                           std::span<const double> weights) {
  std::vector<double> scratch;
  double c = 0.0;
  for (std::size_t i = 0; i < data.n_rows; ++i) {
    const double r = data.y[i] - forward(params, data.row(i), scratch);
    c += weights[i] * r * r;
  }
  return c;
}

inline NormalEq build_normal_eq(const MlpParams& params, const Dataset& data,
                                std::span<const double> weights,
                                std::span<const int> active) {
  const std::size_t p = active.size();
  NormalEq eq;
  eq.h.assign(p * p, 0.0);
  eq.g.assign(p, 0.0);
  std::vector<double> jac(p);
  std::vector<double> scratch;
  for (std::size_t s = 0; s < data.n_rows; ++s) {
    const double y_hat = output_jacobian_into(params, data.row(s), active, jac, scratch);
    const double r = data.y[s] - y_hat;
    const double w = weights[s];
    eq.cost += w * r * r;
    const double wr = w * r;
    for (std::size_t i = 0; i < p; ++i) {
      const double wji = w * jac[i];
      eq.g[i] += wr * jac[i];
      double* hrow = eq.h.data() + i * p;
      const double* jv = jac.data();
      for (std::size_t j = i; j < p; ++j) hrow[j] += wji * jv[j];
    }
  }
  return eq;
}

// One damped step from precomputed normal equations. Returns true and the
// step when (H + damping * diag(H)) is solvable.
inline bool solve_lm_step(const NormalEq& eq, double damping, std::vector<double>& step) {
  const std::size_t p = eq.g.size();
  std::vector<double> a = eq.h;
  for (std::size_t i = 0; i < p; ++i) {
    const double d = eq.h[i * p + i];
    a[i * p + i] = d + damping * d;
  }
  return cholesky_solve(std::move(a), p, eq.g, step);
}

inline MlpParams apply_step(const MlpParams& params, std::span<const int> active,
                            std::span<const double> step) {
  MlpParams out = params;
  for (std::size_t k = 0; k < active.size(); ++k)
    out.set_param(active[k], out.param(active[k]) + step[k]);
  return out;
}

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double norm_inf(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::fabs(x));
  return s;
}

}  // namespace detail

struct LmStepResult {
  MlpParams candidate;
  double new_damping = 0.0;
  bool accepted = false;
  double cost_before = 0.0;
  double cost_after = 0.0;
  double step_norm = 0.0;
};

// One Levenberg-Marquardt iteration: solve (J^T W J + damping diag(J^T W J))
// step = J^T W r, accept when the weighted SSE drops. Masked parameters are
// not part of the system and never move. Throws on a singular system (the
// caller raises damping and retries).
inline LmStepResult lm_iteration(const MlpParams& params, const Dataset& data,
                                 double damping, std::span<const double> weights,
                                 double damping_up = 10.0, double damping_down = 0.1) {
  if (damping <= 0) throw std::invalid_argument("lm_iteration: damping must be positive");
  if (weights.size() != data.n_rows)
    throw std::invalid_argument("lm_iteration: weights length != rows");
  const auto active = params.active_indices();
  const auto eq = detail::build_normal_eq(params, data, weights, active);

  std::vector<double> step;
  if (!detail::solve_lm_step(eq, damping, step))
    throw std::runtime_error("lm_iteration: singular normal equations");

  LmStepResult res;
  res.cost_before = eq.cost;
  res.step_norm = detail::norm2(step);
  res.candidate = detail::apply_step(params, active, step);
  res.cost_after = detail::weighted_sse(res.candidate, data, weights);
  // Non-increase counts as acceptance so an already-optimal model (zero
  // step) is not rejected.
  res.accepted = std::isfinite(res.cost_after) && res.cost_after <= res.cost_before;
  res.new_damping = res.accepted ? damping * damping_down : damping * damping_up;
  if (!res.accepted) res.candidate = params;
  return res;
}

struct TrainResult {
  MlpParams params;
  TrainHistory history;
};

// Batch Levenberg-Marquardt with an iteratively reweighted Huber criterion.
// The sample weights are refreshed after every accepted step (robust mode),
// so late steps stop chasing outliers. Stops on the iteration budget, a
// small gradient, or a small accepted step, and returns the last accepted
// parameters (the accepted chain is monotone in its acceptance basis).
// Pure function of its arguments; no randomness inside.
inline TrainResult train(const MlpParams& init, const Dataset& learn, const TrainConfig& cfg) {
  cfg.validate();
  if (learn.n_rows == 0) throw std::invalid_argument("train: empty learning set");
  if (learn.n_cols != static_cast<std::size_t>(init.n_inputs))
    throw std::invalid_argument("train: dataset width != n_inputs");

  TrainResult out;
  out.params = init;

  auto scaled_residuals = [&](const MlpParams& p) {
    std::vector<double> r(learn.n_rows);
    std::vector<double> scratch;
    for (std::size_t i = 0; i < learn.n_rows; ++i)
      r[i] = learn.y[i] - forward(p, learn.row(i), scratch);
    return r;
  };

  std::vector<double> r = scaled_residuals(out.params);
  std::vector<double> weights =
      cfg.robust ? robust_sample_weights(r, cfg.robust_tuning) : std::vector<double>(learn.n_rows, 1.0);

  double cost = 0.0;
  for (std::size_t i = 0; i < learn.n_rows; ++i) cost += weights[i] * r[i] * r[i];
  if (!std::isfinite(cost)) throw std::invalid_argument("train: non-finite cost at init");

  const auto active = out.params.active_indices();
  if (active.empty()) {
    out.history.stop_reason = "no active parameters";
    return out;
  }

  double damping = cfg.initial_damping;
  int iter = 0;
  constexpr double kDampingCeiling = 1e14;

  while (iter < cfg.max_iterations) {
    const auto eq = detail::build_normal_eq(out.params, learn, weights, active);
    cost = eq.cost;
    if (detail::norm_inf(eq.g) < cfg.gradient_tolerance) {
      out.history.stop_reason = "gradient tolerance";
      return out;
    }

    bool stepped = false;
    while (iter < cfg.max_iterations) {
      ++iter;
      std::vector<double> step;
      if (!detail::solve_lm_step(eq, damping, step)) {
        out.history.records.push_back({iter, cost, damping, 0.0, false});
        damping *= cfg.damping_up;
        if (damping > kDampingCeiling) {
          out.history.stop_reason = "damping ceiling (singular system)";
          return out;
        }
        continue;
      }
      const double step_norm = detail::norm2(step);
      MlpParams candidate = detail::apply_step(out.params, active, step);
      const double cand_cost = detail::weighted_sse(candidate, learn, weights);
      const bool accepted = std::isfinite(cand_cost) && cand_cost < cost;
      out.history.records.push_back({iter, cand_cost, damping, step_norm, accepted});

      if (accepted) {
        const double improvement = cost - cand_cost;
        out.params = std::move(candidate);
        damping = std::max(damping * cfg.damping_down, 1e-12);
        if (cfg.robust) {
          r = scaled_residuals(out.params);
          weights = robust_sample_weights(r, cfg.robust_tuning);
        }
        if (step_norm < cfg.step_tolerance) {
          out.history.stop_reason = "step tolerance";
          return out;
        }
        if (cfg.cost_tolerance > 0.0 && improvement < cfg.cost_tolerance * cost) {
          out.history.stop_reason = "cost tolerance";
          return out;
        }
        stepped = true;
        break;
      }
      // A rejected step this small cannot improve further: converged.
      if (step_norm < cfg.step_tolerance) {
        out.history.stop_reason = "step tolerance (stalled)";
        return out;
      }
      damping *= cfg.damping_up;
      if (damping > kDampingCeiling) {
        out.history.stop_reason = "damping ceiling";
        return out;
      }
    }
    if (!stepped && iter >= cfg.max_iterations) break;
  }
  out.history.stop_reason = "iteration budget";
  return out;
}

}  // namespace millreduce

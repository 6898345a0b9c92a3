#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "millreduce/trainer.hpp"

namespace millreduce {

struct PruneConfig {
  // A removal survives while the pruned model's validation RMSE stays
  // within this factor of the best validation RMSE seen so far.
  double val_degradation_limit = 1.02;
  int retrain_iterations = 30;
  int max_removals = std::numeric_limits<int>::max();

  void validate() const {
    if (val_degradation_limit < 1.0)
      throw std::invalid_argument("PruneConfig: degradation limit must be >= 1");
    if (retrain_iterations < 1 || max_removals < 1)
      throw std::invalid_argument("PruneConfig: counts must be positive");
  }
};

// Saliency of parameter j: the exact SSE increase on the learning set when
// that parameter alone is set to 0. Returned per canonical parameter index;
// masked parameters get +inf so an argmin never picks them. Negative values
// are possible (removing the weight helps) and prune first.
//
// Evaluated incrementally from cached hidden activations instead of zeroing
// each weight and re-running the whole forward pass; the two agree to
// floating-point roundoff, which the tests pin down.
inline std::vector<double> saliency(const MlpParams& params, const Dataset& learn) {
  if (learn.n_rows == 0) throw std::invalid_argument("saliency: empty learning set");
  if (learn.n_cols != static_cast<std::size_t>(params.n_inputs))
    throw std::invalid_argument("saliency: dataset width != n_inputs");

  const std::size_t n = learn.n_rows;
  const int nh = params.n_hidden;
  const int ni = params.n_inputs;

  // Cache z, g(z) and the residual per sample.
  std::vector<double> z(n * static_cast<std::size_t>(nh));
  std::vector<double> act(n * static_cast<std::size_t>(nh));
  std::vector<double> res(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto x = learn.row(s);
    double y_hat = params.output_bias;
    for (int i = 0; i < nh; ++i) {
      const double* row = params.hidden_weights.data() + static_cast<std::size_t>(i) * ni;
      double zi = params.hidden_biases[static_cast<std::size_t>(i)];
      for (int h = 0; h < ni; ++h) zi += row[h] * x[static_cast<std::size_t>(h)];
      const double g = activation(zi);
      z[s * static_cast<std::size_t>(nh) + static_cast<std::size_t>(i)] = zi;
      act[s * static_cast<std::size_t>(nh) + static_cast<std::size_t>(i)] = g;
      y_hat += params.output_weights[static_cast<std::size_t>(i)] * g;
    }
    res[s] = learn.y[s] - y_hat;
  }
  double base_sse = 0.0;
  for (double r : res) base_sse += r * r;

  const int total = params.total_params();
  std::vector<double> sal(static_cast<std::size_t>(total),
                          std::numeric_limits<double>::infinity());
  const int nw = nh * ni;

  for (int idx = 0; idx < total; ++idx) {
    if (!params.is_active(idx)) continue;
    double sse = 0.0;
    if (idx < nw) {
      const int neuron = idx / ni;
      const int input = idx % ni;
      const double w = params.hidden_weights[static_cast<std::size_t>(idx)];
      const double w2 = params.output_weights[static_cast<std::size_t>(neuron)];
      for (std::size_t s = 0; s < n; ++s) {
        const double zi = z[s * static_cast<std::size_t>(nh) + static_cast<std::size_t>(neuron)];
        const double gi = act[s * static_cast<std::size_t>(nh) + static_cast<std::size_t>(neuron)];
        const double delta = w2 * (activation(zi - w * learn.at(s, static_cast<std::size_t>(input))) - gi);
        const double r = res[s] - delta;
        sse += r * r;
      }
    } else if (idx < nw + nh) {
      const int neuron = idx - nw;
      const double b = params.hidden_biases[static_cast<std::size_t>(neuron)];
      const double w2 = params.output_weights[static_cast<std::size_t>(neuron)];
      for (std::size_t s = 0; s < n; ++s) {
        const double zi = z[s * static_cast<std::size_t>(nh) + static_cast<std::size_t>(neuron)];
        const double gi = act[s * static_cast<std::size_t>(nh) + static_cast<std::size_t>(neuron)];
        const double delta = w2 * (activation(zi - b) - gi);
        const double r = res[s] - delta;
        sse += r * r;
      }
    } else if (idx < nw + 2 * nh) {
      const int neuron = idx - nw - nh;
      const double w2 = params.output_weights[static_cast<std::size_t>(neuron)];
      for (std::size_t s = 0; s < n; ++s) {
        const double r = res[s] + w2 * act[s * static_cast<std::size_t>(nh) + static_cast<std::size_t>(neuron)];
        sse += r * r;
      }
    } else {
      for (std::size_t s = 0; s < n; ++s) {
        const double r = res[s] + params.output_bias;
        sse += r * r;
      }
    }
    sal[static_cast<std::size_t>(idx)] = sse - base_sse;
  }
  return sal;
}

// A hidden neuron with no surviving input weight or no surviving output
// weight cannot influence the output through data; mask it entirely.
inline void mask_dead_neurons(MlpParams& p) {
  for (int i = 0; i < p.n_hidden; ++i) {
    bool any_in = false;
    for (int h = 0; h < p.n_inputs; ++h)
      if (p.is_active(p.hw_index(i, h))) {
        any_in = true;
        break;
      }
    const bool out_alive = p.is_active(p.ow_index(i));
    if (any_in && out_alive) continue;
    if (!any_in && !out_alive && !p.is_active(p.hb_index(i))) continue;  // already dead
    for (int h = 0; h < p.n_inputs; ++h) p.mask_param(p.hw_index(i, h));
    p.mask_param(p.hb_index(i));
    p.mask_param(p.ow_index(i));
  }
}

struct RemovalRecord {
  int step = 0;
  int param_index = -1;
  double val_rmse = 0.0;
  bool accepted = false;
};

struct PruneResult {
  MlpParams params;
  std::vector<RemovalRecord> removal_log;

  std::string removal_log_csv() const {
    std::ostringstream os;
    os << "step,weight_id,val_rmse,accepted\n";
    char buf[96];
    for (const RemovalRecord& r : removal_log) {
      std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%d\n", r.step, r.param_index, r.val_rmse,
                    r.accepted ? 1 : 0);
      os << buf;
    }
    return os.str();
  }
};

// Backward weight elimination with retraining, validation-guarded:
// repeatedly masks the lowest-saliency active parameter, retrains briefly,
// and keeps the removal while the validation RMSE stays within the
// configured factor of the best seen. The first rejected removal is rolled
// back and the loop stops; the surviving structure then gets one full
// training pass (also validation-guarded, so the final model never breaks
// the degradation bound).
inline PruneResult prune_and_retrain(const MlpParams& trained, const Dataset& learn,
                                     const Dataset& val, const TrainConfig& tcfg,
                                     const PruneConfig& pcfg) {
  pcfg.validate();
  if (val.n_rows == 0) throw std::invalid_argument("prune_and_retrain: empty validation set");

  PruneResult out;
  out.params = trained;

  // Brief retraining: a capped iteration budget and a coarser step
  // tolerance, enough to re-settle the net after losing one weight. The
  // accepted survivor gets a full-length pass at the end.
  TrainConfig short_cfg = tcfg;
  short_cfg.max_iterations = pcfg.retrain_iterations;
  short_cfg.step_tolerance = std::max(tcfg.step_tolerance, 1e-4);
  short_cfg.cost_tolerance = std::max(tcfg.cost_tolerance, 1e-6);

  auto val_rmse = [&](const MlpParams& p) { return rmse(residuals(p, val)); };

  double best_val = val_rmse(out.params);
  const double eps = pcfg.val_degradation_limit;

  for (int step = 1; step <= pcfg.max_removals; ++step) {
    const auto sal = saliency(out.params, learn);
    int pick = -1;
    double lowest = std::numeric_limits<double>::infinity();
    for (int j = 0; j < out.params.total_params(); ++j) {
      if (!out.params.is_active(j)) continue;
      if (sal[static_cast<std::size_t>(j)] < lowest) {
        lowest = sal[static_cast<std::size_t>(j)];
        pick = j;
      }
    }
    if (pick < 0) break;  // nothing left to remove

    MlpParams candidate = out.params;
    candidate.mask_param(pick);
    mask_dead_neurons(candidate);
    if (candidate.active_count() > 0)
      candidate = train(candidate, learn, short_cfg).params;
    double v = val_rmse(candidate);

    // A near-miss may just be an under-polished retrain; give the candidate
    // one full-length pass before deciding to stop.
    if (v > eps * best_val && candidate.active_count() > 0) {
      MlpParams polished = train(candidate, learn, tcfg).params;
      const double pv = val_rmse(polished);
      if (pv < v) {
        candidate = std::move(polished);
        v = pv;
      }
    }

    const bool accepted = v <= eps * best_val;
    out.removal_log.push_back({step, pick, v, accepted});
    if (!accepted) break;
    out.params = std::move(candidate);
    best_val = std::min(best_val, v);
  }

  // Final full-length pass on the surviving structure.
  if (out.params.active_count() > 0) {
    MlpParams full = train(out.params, learn, tcfg).params;
    const double v = val_rmse(full);
    if (v <= eps * best_val) out.params = std::move(full);
  }
  return out;
}

}  // namespace millreduce

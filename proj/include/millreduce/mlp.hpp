#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "millreduce/rng.hpp"

namespace millreduce {

// One-hidden-layer perceptron with a tanh hidden layer and a linear output
// neuron:
//
//   y(x) = sum_i w2[i] * g(sum_h w1[i][h] * x[h] + b1[i]) + b2
//
// Parameters live in a single canonical order that every consumer (Jacobian
// columns, pruning mask, persistence) relies on:
//
//   [hidden weights row-major (neuron-major)] [hidden biases]
//   [output weights] [output bias]
//
// A parameter whose mask entry is false is pruned: its value is pinned to
// exactly 0 and it is skipped by the Jacobian and by training updates.
struct MlpParams {
  int n_inputs = 0;
  int n_hidden = 0;
  std::vector<double> hidden_weights;  // n_hidden x n_inputs, row-major
  std::vector<double> hidden_biases;   // n_hidden
  std::vector<double> output_weights;  // n_hidden
  double output_bias = 0.0;
  std::vector<std::uint8_t> active_mask;  // total_params() flags, canonical order

  int total_params() const { return n_hidden * n_inputs + 2 * n_hidden + 1; }

  int hw_index(int neuron, int input) const { return neuron * n_inputs + input; }
  int hb_index(int neuron) const { return n_hidden * n_inputs + neuron; }
  int ow_index(int neuron) const { return n_hidden * n_inputs + n_hidden + neuron; }
  int ob_index() const { return n_hidden * n_inputs + 2 * n_hidden; }

  double param(int idx) const {
    const int nw = n_hidden * n_inputs;
    if (idx < nw) return hidden_weights[static_cast<std::size_t>(idx)];
    if (idx < nw + n_hidden) return hidden_biases[static_cast<std::size_t>(idx - nw)];
    if (idx < nw + 2 * n_hidden)
      return output_weights[static_cast<std::size_t>(idx - nw - n_hidden)];
    return output_bias;
  }

  void set_param(int idx, double v) {
    const int nw = n_hidden * n_inputs;
    if (idx < nw)
      hidden_weights[static_cast<std::size_t>(idx)] = v;
    else if (idx < nw + n_hidden)
      hidden_biases[static_cast<std::size_t>(idx - nw)] = v;
    else if (idx < nw + 2 * n_hidden)
      output_weights[static_cast<std::size_t>(idx - nw - n_hidden)] = v;
    else
      output_bias = v;
  }

  bool is_active(int idx) const { return active_mask[static_cast<std::size_t>(idx)] != 0; }

  // Pruning a parameter pins it to zero.
  void mask_param(int idx) {
    active_mask[static_cast<std::size_t>(idx)] = 0;
    set_param(idx, 0.0);
  }

  int active_count() const {
    int n = 0;
    for (auto f : active_mask) n += (f != 0);
    return n;
  }

  std::vector<int> active_indices() const {
    std::vector<int> idx;
    idx.reserve(active_mask.size());
    for (int i = 0; i < total_params(); ++i)
      if (is_active(i)) idx.push_back(i);
    return idx;
  }

  void validate() const {
    if (n_inputs < 1 || n_hidden < 1)
      throw std::invalid_argument("MlpParams: dimensions must be >= 1");
    const auto nh = static_cast<std::size_t>(n_hidden);
    const auto nw = static_cast<std::size_t>(n_hidden) * static_cast<std::size_t>(n_inputs);
    if (hidden_weights.size() != nw || hidden_biases.size() != nh ||
        output_weights.size() != nh ||
        active_mask.size() != static_cast<std::size_t>(total_params()))
      throw std::invalid_argument("MlpParams: inconsistent storage sizes");
    for (int i = 0; i < total_params(); ++i) {
      const double v = param(i);
      if (!std::isfinite(v)) throw std::invalid_argument("MlpParams: non-finite parameter");
      if (!is_active(i) && v != 0.0)
        throw std::invalid_argument("MlpParams: masked parameter must be exactly 0");
    }
  }
};

// Hidden activation: tanh in its algebraically stable form, branched on
// sign so the exponential argument is never positive. Saturates cleanly to
// +-1 for |z| up to and beyond 1e6 instead of overflowing like the naive
// (1 - e^-2z) / (1 + e^-2z) does for large negative z.
inline double activation(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-2.0 * z);
    return (1.0 - e) / (1.0 + e);
  }
  const double e = std::exp(2.0 * z);
  return (e - 1.0) / (e + 1.0);
}
inline double activation_derivative_from_output(double g) { return 1.0 - g * g; }

// Nguyen-Widrow initialization of an all-active network. Each hidden row is
// a random direction (components uniform in [-1,1]) rescaled to Euclidean
// norm beta = 0.7 * n_hidden^(1/n_inputs); hidden biases are uniform in
// [-beta, beta], output weights uniform in [-0.5, 0.5], output bias 0.
// Assumes inputs scaled to [-1, 1]. Deterministic for a given seed.
inline MlpParams nguyen_widrow_init(int n_inputs, int n_hidden, std::uint64_t seed) {
  if (n_inputs < 1 || n_hidden < 1)
    throw std::invalid_argument("nguyen_widrow_init: dimensions must be >= 1");

  MlpParams p;
  p.n_inputs = n_inputs;
  p.n_hidden = n_hidden;
  p.hidden_weights.resize(static_cast<std::size_t>(n_hidden) * n_inputs);
  p.hidden_biases.resize(static_cast<std::size_t>(n_hidden));
  p.output_weights.resize(static_cast<std::size_t>(n_hidden));
  p.active_mask.assign(static_cast<std::size_t>(p.total_params()), 1);

  const double beta = 0.7 * std::pow(static_cast<double>(n_hidden), 1.0 / n_inputs);
  Rng rng(seed);

  for (int i = 0; i < n_hidden; ++i) {
    double norm_sq = 0.0;
    do {
      norm_sq = 0.0;
      for (int h = 0; h < n_inputs; ++h) {
        const double v = rng.uniform(-1.0, 1.0);
        p.hidden_weights[static_cast<std::size_t>(p.hw_index(i, h))] = v;
        norm_sq += v * v;
      }
    } while (norm_sq < 1e-24);  // degenerate direction: redraw
    const double scale = beta / std::sqrt(norm_sq);
    for (int h = 0; h < n_inputs; ++h)
      p.hidden_weights[static_cast<std::size_t>(p.hw_index(i, h))] *= scale;
  }
  for (int i = 0; i < n_hidden; ++i) p.hidden_biases[static_cast<std::size_t>(i)] = rng.uniform(-beta, beta);
  for (int i = 0; i < n_hidden; ++i) p.output_weights[static_cast<std::size_t>(i)] = rng.uniform(-0.5, 0.5);
  p.output_bias = 0.0;
  return p;
}

// Forward pass; hidden_out receives g(z) per hidden neuron (resized).
// A neuron whose output weight is pruned cannot influence the output (the
// weight is pinned to 0), so its row is skipped outright.
inline double forward(const MlpParams& p, std::span<const double> x,
                      std::vector<double>& hidden_out) {
  if (static_cast<int>(x.size()) != p.n_inputs)
    throw std::invalid_argument("forward: input length != n_inputs");
  hidden_out.resize(static_cast<std::size_t>(p.n_hidden));
  double y = p.output_bias;
  for (int i = 0; i < p.n_hidden; ++i) {
    if (!p.is_active(p.ow_index(i))) {
      hidden_out[static_cast<std::size_t>(i)] = 0.0;
      continue;
    }
    const double* row = p.hidden_weights.data() + static_cast<std::size_t>(i) * p.n_inputs;
    double z = p.hidden_biases[static_cast<std::size_t>(i)];
    for (int h = 0; h < p.n_inputs; ++h) z += row[h] * x[static_cast<std::size_t>(h)];
    const double g = activation(z);
    hidden_out[static_cast<std::size_t>(i)] = g;
    y += p.output_weights[static_cast<std::size_t>(i)] * g;
  }
  return y;
}

inline double forward(const MlpParams& p, std::span<const double> x) {
  std::vector<double> scratch;
  return forward(p, x, scratch);
}

// d y / d theta for every *active* parameter, in canonical order with masked
// entries omitted. `active` must be p.active_indices(); `out` must have
// active.size() slots. Returns y(x) as a by-product.
inline double output_jacobian_into(const MlpParams& p, std::span<const double> x,
                                   std::span<const int> active, std::span<double> out,
                                   std::vector<double>& hidden_scratch) {
  const double y = forward(p, x, hidden_scratch);
  const int nw = p.n_hidden * p.n_inputs;
  for (std::size_t k = 0; k < active.size(); ++k) {
    const int idx = active[k];
    if (idx < nw) {
      const int neuron = idx / p.n_inputs;
      const int input = idx % p.n_inputs;
      const double gp = activation_derivative_from_output(hidden_scratch[static_cast<std::size_t>(neuron)]);
      out[k] = p.output_weights[static_cast<std::size_t>(neuron)] * gp * x[static_cast<std::size_t>(input)];
    } else if (idx < nw + p.n_hidden) {
      const int neuron = idx - nw;
      const double gp = activation_derivative_from_output(hidden_scratch[static_cast<std::size_t>(neuron)]);
      out[k] = p.output_weights[static_cast<std::size_t>(neuron)] * gp;
    } else if (idx < nw + 2 * p.n_hidden) {
      const int neuron = idx - nw - p.n_hidden;
      out[k] = hidden_scratch[static_cast<std::size_t>(neuron)];
    } else {
      out[k] = 1.0;
    }
  }
  return y;
}

inline std::vector<double> output_jacobian(const MlpParams& p, std::span<const double> x) {
  const auto active = p.active_indices();
  std::vector<double> jac(active.size());
  std::vector<double> scratch;
  output_jacobian_into(p, x, active, jac, scratch);
  return jac;
}

struct EffectiveStructure {
  int active_inputs = 0;
  int active_hidden = 0;
  int active_weights = 0;
};

// An input is read if any unmasked hidden weight touches it; a hidden neuron
// is live if its output weight and at least one incoming weight survive.
inline EffectiveStructure effective_structure(const MlpParams& p) {
  EffectiveStructure s;
  s.active_weights = p.active_count();
  for (int h = 0; h < p.n_inputs; ++h) {
    for (int i = 0; i < p.n_hidden; ++i) {
      if (p.is_active(p.hw_index(i, h))) {
        ++s.active_inputs;
        break;
      }
    }
  }
  for (int i = 0; i < p.n_hidden; ++i) {
    if (!p.is_active(p.ow_index(i))) continue;
    for (int h = 0; h < p.n_inputs; ++h) {
      if (p.is_active(p.hw_index(i, h))) {
        ++s.active_hidden;
        break;
      }
    }
  }
  return s;
}

}  // namespace millreduce

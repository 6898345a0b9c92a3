#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace millreduce {

// What a feature column holds, which decides how the scaler treats it.
//   Continuous : min-max mapped to [-1, 1], range fitted on the learning set
//   TPiece     : ordinal cutting-step code {1,2,3}, fixed map to {-1,0,1}
//   Discrete   : category codes fed to the net exactly as encoded (the
//                representation under study; rescaling them would erase the
//                difference between the encoding schemes)
enum class ColumnKind : std::uint8_t { Continuous, TPiece, Discrete };

inline const char* to_string(ColumnKind k) {
  switch (k) {
    case ColumnKind::Continuous: return "continuous";
    case ColumnKind::TPiece: return "t_piece";
    case ColumnKind::Discrete: return "discrete";
  }
  return "?";
}

// Per-column affine transform plus the target z-score. Fitted on the
// learning set only; fit_rows fingerprints the fitting set so that a refit
// on validation data is detectable.
struct Scaler {
  struct Column {
    ColumnKind kind = ColumnKind::Continuous;
    double lo = -1.0, hi = 1.0;  // data range (continuous) or nominal range
    bool constant = false;       // degenerate column, mapped to 0 with a warning
  };
  std::vector<Column> columns;
  double target_mean = 0.0;
  double target_std = 1.0;
  std::size_t fit_rows = 0;

  bool fitted() const { return fit_rows > 0; }

  double apply_feature(std::size_t col, double v) const {
    const Column& c = columns[col];
    if (c.kind == ColumnKind::Discrete) return v;
    if (c.constant) return 0.0;
    return -1.0 + 2.0 * (v - c.lo) / (c.hi - c.lo);
  }

  double invert_feature(std::size_t col, double v) const {
    const Column& c = columns[col];
    if (c.kind == ColumnKind::Discrete) return v;
    if (c.constant) return c.lo;
    return c.lo + (v + 1.0) * 0.5 * (c.hi - c.lo);
  }

  double apply_target(double y) const { return (y - target_mean) / target_std; }
  double invert_target(double y) const { return y * target_std + target_mean; }
};

// Encoded feature matrix (row-major) plus the delta-T target. `scaled`
// says whether `x`/`y` are in scaler space or raw units; the scaler of a
// scaled dataset is always the one fitted on its learning partition.
struct Dataset {
  std::vector<std::string> column_names;
  std::vector<ColumnKind> column_kinds;
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<double> x;  // n_rows * n_cols
  std::vector<double> y;  // n_rows, seconds when !scaled
  bool scaled = false;
  Scaler scaler;  // identity until fitted

  std::span<const double> row(std::size_t i) const {
    return {x.data() + i * n_cols, n_cols};
  }
  double at(std::size_t i, std::size_t j) const { return x[i * n_cols + j]; }

  void validate() const {
    if (column_names.size() != n_cols || column_kinds.size() != n_cols)
      throw std::invalid_argument("Dataset: column metadata mismatch");
    if (x.size() != n_rows * n_cols || y.size() != n_rows)
      throw std::invalid_argument("Dataset: storage size mismatch");
    for (double v : x)
      if (!std::isfinite(v)) throw std::invalid_argument("Dataset: non-finite feature");
    for (double v : y)
      if (!std::isfinite(v)) throw std::invalid_argument("Dataset: non-finite target");
  }

  Dataset take_rows(std::span<const std::size_t> idx) const {
    Dataset out;
    out.column_names = column_names;
    out.column_kinds = column_kinds;
    out.n_cols = n_cols;
    out.n_rows = idx.size();
    out.scaled = scaled;
    out.scaler = scaler;
    out.x.reserve(idx.size() * n_cols);
    out.y.reserve(idx.size());
    for (std::size_t i : idx) {
      auto r = row(i);
      out.x.insert(out.x.end(), r.begin(), r.end());
      out.y.push_back(y[i]);
    }
    return out;
  }
};

}  // namespace millreduce

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "millreduce/dataset.hpp"
#include "millreduce/rng.hpp"
#include "millreduce/sawmill.hpp"

namespace millreduce {

// The three representations of the RQM conveyor choice under study:
//   A1  raw conveyor number, 4 or 5
//   A2  binary, RQM4 -> 0 and RQM5 -> 1
//   A3  the A2 column plus its complement (RQM4 -> 1, RQM5 -> 0)
enum class EncodingScheme : std::uint8_t { A1Raw45 = 1, A2Binary = 2, A3BinaryPlusComplement = 3 };

inline const char* to_string(EncodingScheme s) {
  switch (s) {
    case EncodingScheme::A1Raw45: return "a1";
    case EncodingScheme::A2Binary: return "a2";
    case EncodingScheme::A3BinaryPlusComplement: return "a3";
  }
  return "?";
}

inline EncodingScheme scheme_from_string(const std::string& s) {
  if (s == "a1" || s == "A1") return EncodingScheme::A1Raw45;
  if (s == "a2" || s == "A2") return EncodingScheme::A2Binary;
  if (s == "a3" || s == "A3") return EncodingScheme::A3BinaryPlusComplement;
  throw std::invalid_argument("unknown encoding scheme: " + s);
}

inline std::size_t encoded_width(EncodingScheme s) {
  return s == EncodingScheme::A3BinaryPlusComplement ? 13 : 12;
}

inline std::vector<std::string> encoded_column_names(EncodingScheme s) {
  std::vector<std::string> names = {"lg",     "dia_gb", "dia_moy", "dia_pb",
                                    "t_piece", "q_trim", "u_trim",  "q_rqm",
                                    "q_rqm4", "q_rqm5", "q_rqm7",  "rqm"};
  if (s == EncodingScheme::A3BinaryPlusComplement) names.push_back("rqm_bar");
  return names;
}

inline std::vector<ColumnKind> encoded_column_kinds(EncodingScheme s) {
  std::vector<ColumnKind> kinds(12, ColumnKind::Continuous);
  kinds[4] = ColumnKind::TPiece;
  kinds[11] = ColumnKind::Discrete;
  if (s == EncodingScheme::A3BinaryPlusComplement) kinds.push_back(ColumnKind::Discrete);
  return kinds;
}

// Writes one trace's feature row into out (size encoded_width(scheme)).
inline void encode_row(const ProductTrace& tr, EncodingScheme scheme, std::span<double> out) {
  out[0] = tr.lg;
  out[1] = tr.dia_gb;
  out[2] = tr.dia_moy;
  out[3] = tr.dia_pb;
  out[4] = static_cast<double>(tr.t_piece);
  out[5] = static_cast<double>(tr.q_trim);
  out[6] = tr.u_trim;
  out[7] = static_cast<double>(tr.q_rqm);
  out[8] = static_cast<double>(tr.q_rqm4);
  out[9] = static_cast<double>(tr.q_rqm5);
  out[10] = static_cast<double>(tr.q_rqm7);
  const bool rqm4 = tr.rqm == RqmRoute::Rqm4;
  switch (scheme) {
    case EncodingScheme::A1Raw45:
      out[11] = rqm4 ? 4.0 : 5.0;
      break;
    case EncodingScheme::A2Binary:
      out[11] = rqm4 ? 0.0 : 1.0;
      break;
    case EncodingScheme::A3BinaryPlusComplement:
      out[11] = rqm4 ? 0.0 : 1.0;
      out[12] = 1.0 - out[11];
      break;
  }
}

inline Dataset encode(std::span<const ProductTrace> traces, EncodingScheme scheme) {
  if (traces.empty()) throw std::invalid_argument("encode: no traces");
  Dataset d;
  d.column_names = encoded_column_names(scheme);
  d.column_kinds = encoded_column_kinds(scheme);
  d.n_cols = encoded_width(scheme);
  d.n_rows = traces.size();
  d.x.resize(d.n_rows * d.n_cols);
  d.y.resize(d.n_rows);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    encode_row(traces[i], scheme, {d.x.data() + i * d.n_cols, d.n_cols});
    d.y[i] = traces[i].delta_t;
  }
  return d;
}

// Fits column ranges and the target z-score on `data` (call it on the
// learning partition only) and returns the fitted scaler. Continuous
// columns map min-max onto [-1, 1]; T_piece maps {1,2,3} onto {-1,0,1};
// discrete category columns pass through untouched so each encoding
// scheme's representation reaches the network as designed. A constant
// continuous column is flagged and pinned to 0.
inline Scaler fit_scaler(const Dataset& data) {
  if (data.n_rows == 0) throw std::invalid_argument("fit_scaler: empty dataset");
  Scaler s;
  s.columns.resize(data.n_cols);
  for (std::size_t j = 0; j < data.n_cols; ++j) {
    Scaler::Column& c = s.columns[j];
    c.kind = data.column_kinds[j];
    if (c.kind == ColumnKind::TPiece) {
      c.lo = 1.0;
      c.hi = 3.0;
      continue;
    }
    double lo = data.at(0, j), hi = lo;
    for (std::size_t i = 1; i < data.n_rows; ++i) {
      lo = std::min(lo, data.at(i, j));
      hi = std::max(hi, data.at(i, j));
    }
    if (!std::isfinite(lo) || !std::isfinite(hi))
      throw std::invalid_argument("fit_scaler: non-finite column range");
    c.lo = lo;
    c.hi = hi;
    // Discrete columns keep their range as metadata only (identifies the
    // encoding scheme in a saved model); apply passes them through.
    c.constant = c.kind == ColumnKind::Continuous && hi == lo;
  }
  double mean = 0.0;
  for (double v : data.y) mean += v;
  mean /= static_cast<double>(data.n_rows);
  double var = 0.0;
  for (double v : data.y) var += (v - mean) * (v - mean);
  var = data.n_rows > 1 ? var / static_cast<double>(data.n_rows - 1) : 0.0;
  s.target_mean = mean;
  s.target_std = var > 0.0 ? std::sqrt(var) : 1.0;
  s.fit_rows = data.n_rows;
  return s;
}

// Applies a fitted scaler (never refits; validation rows outside the fitted
// range land outside [-1, 1] without clipping).
inline Dataset apply_scaler(const Dataset& data, const Scaler& s) {
  if (!s.fitted()) throw std::invalid_argument("apply_scaler: scaler not fitted");
  if (s.columns.size() != data.n_cols)
    throw std::invalid_argument("apply_scaler: column count mismatch");
  Dataset out = data;
  for (std::size_t i = 0; i < data.n_rows; ++i)
    for (std::size_t j = 0; j < data.n_cols; ++j)
      out.x[i * data.n_cols + j] = s.apply_feature(j, data.at(i, j));
  for (std::size_t i = 0; i < data.n_rows; ++i) out.y[i] = s.apply_target(data.y[i]);
  out.scaled = true;
  out.scaler = s;
  return out;
}

// fit + apply in one step, for the learning partition.
inline std::pair<Dataset, Scaler> fit_apply_scaler(const Dataset& learn) {
  Scaler s = fit_scaler(learn);
  return {apply_scaler(learn, s), s};
}

// Uniform random partition without replacement; deterministic per seed.
// The learning part takes ceil(n * learn_fraction) rows, both parts are
// non-empty.
inline std::pair<Dataset, Dataset> split(const Dataset& data, double learn_fraction,
                                         std::uint64_t seed) {
  if (!(learn_fraction > 0.0 && learn_fraction < 1.0))
    throw std::invalid_argument("split: fraction must be in (0, 1)");
  if (data.n_rows < 2) throw std::invalid_argument("split: need at least 2 rows");
  std::vector<std::size_t> idx(data.n_rows);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(idx);
  auto n_learn = static_cast<std::size_t>(
      std::ceil(static_cast<double>(data.n_rows) * learn_fraction));
  n_learn = std::clamp<std::size_t>(n_learn, 1, data.n_rows - 1);
  std::vector<std::size_t> learn_idx(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_learn));
  std::vector<std::size_t> val_idx(idx.begin() + static_cast<std::ptrdiff_t>(n_learn), idx.end());
  // Keep rows in original order inside each part.
  std::sort(learn_idx.begin(), learn_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
  return {data.take_rows(learn_idx), data.take_rows(val_idx)};
}

// Chronological split: the first rows learn, the tail validates.
inline std::pair<Dataset, Dataset> split_chrono(const Dataset& data, double learn_fraction) {
  if (!(learn_fraction > 0.0 && learn_fraction < 1.0))
    throw std::invalid_argument("split_chrono: fraction must be in (0, 1)");
  if (data.n_rows < 2) throw std::invalid_argument("split_chrono: need at least 2 rows");
  auto n_learn = static_cast<std::size_t>(
      std::ceil(static_cast<double>(data.n_rows) * learn_fraction));
  n_learn = std::clamp<std::size_t>(n_learn, 1, data.n_rows - 1);
  std::vector<std::size_t> learn_idx(n_learn), val_idx(data.n_rows - n_learn);
  std::iota(learn_idx.begin(), learn_idx.end(), std::size_t{0});
  std::iota(val_idx.begin(), val_idx.end(), n_learn);
  return {data.take_rows(learn_idx), data.take_rows(val_idx)};
}

}  // namespace millreduce

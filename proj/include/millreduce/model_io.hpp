#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "millreduce/dataset.hpp"
#include "millreduce/mlp.hpp"

namespace millreduce {

// A trained model bundled with everything needed to feed it: the encoded
// input column names and the scaler fitted on its learning set. Numbers
// survive the JSON round trip bit-exactly (shortest round-trip printing).
struct SavedModel {
  MlpParams params;
  std::vector<std::string> input_column_names;
  Scaler scaler;
};

inline nlohmann::json to_json(const Scaler& s) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : s.columns)
    cols.push_back({{"kind", to_string(c.kind)}, {"lo", c.lo}, {"hi", c.hi}, {"constant", c.constant}});
  return {{"columns", cols},
          {"target_mean", s.target_mean},
          {"target_std", s.target_std},
          {"fit_rows", s.fit_rows}};
}

inline Scaler scaler_from_json(const nlohmann::json& j) {
  Scaler s;
  for (const auto& c : j.at("columns")) {
    Scaler::Column col;
    const std::string kind = c.at("kind").get<std::string>();
    if (kind == "continuous")
      col.kind = ColumnKind::Continuous;
    else if (kind == "t_piece")
      col.kind = ColumnKind::TPiece;
    else if (kind == "discrete")
      col.kind = ColumnKind::Discrete;
    else
      throw std::invalid_argument("scaler_from_json: unknown column kind " + kind);
    col.lo = c.at("lo").get<double>();
    col.hi = c.at("hi").get<double>();
    col.constant = c.at("constant").get<bool>();
    s.columns.push_back(col);
  }
  s.target_mean = j.at("target_mean").get<double>();
  s.target_std = j.at("target_std").get<double>();
  s.fit_rows = j.at("fit_rows").get<std::size_t>();
  return s;
}

inline nlohmann::json to_json(const SavedModel& m) {
  std::vector<bool> mask(m.params.active_mask.begin(), m.params.active_mask.end());
  return {{"n_inputs", m.params.n_inputs},
          {"n_hidden", m.params.n_hidden},
          {"hidden_weights", m.params.hidden_weights},
          {"hidden_biases", m.params.hidden_biases},
          {"output_weights", m.params.output_weights},
          {"output_bias", m.params.output_bias},
          {"active_mask", mask},
          {"input_column_names", m.input_column_names},
          {"scaler", to_json(m.scaler)}};
}

inline SavedModel model_from_json(const nlohmann::json& j) {
  SavedModel m;
  m.params.n_inputs = j.at("n_inputs").get<int>();
  m.params.n_hidden = j.at("n_hidden").get<int>();
  m.params.hidden_weights = j.at("hidden_weights").get<std::vector<double>>();
  m.params.hidden_biases = j.at("hidden_biases").get<std::vector<double>>();
  m.params.output_weights = j.at("output_weights").get<std::vector<double>>();
  m.params.output_bias = j.at("output_bias").get<double>();
  const auto mask = j.at("active_mask").get<std::vector<bool>>();
  m.params.active_mask.assign(mask.begin(), mask.end());
  m.input_column_names = j.at("input_column_names").get<std::vector<std::string>>();
  m.scaler = scaler_from_json(j.at("scaler"));
  m.params.validate();
  return m;
}

inline void save_model(const SavedModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_model: cannot write " + path);
  out << to_json(m).dump(2) << '\n';
}

inline SavedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_model: cannot read " + path);
  nlohmann::json j;
  in >> j;
  return model_from_json(j);
}

}  // namespace millreduce

#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "millreduce/dataset.hpp"
#include "millreduce/reduction.hpp"
#include "millreduce/sawmill.hpp"

namespace millreduce {

// Full-precision double formatting; %.17g round-trips IEEE doubles.
inline std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline constexpr const char* kTraceCsvHeader =
    "log_id,product_index,t_piece,rqm,lg,dia_pb,dia_gb,dia_moy,"
    "q_trim,u_trim,q_rqm4,q_rqm5,q_rqm7,q_rqm,delta_t";

inline void write_traces_csv(std::ostream& os, std::span<const ProductTrace> traces) {
  os << kTraceCsvHeader << '\n';
  for (const ProductTrace& t : traces) {
    os << t.log_id << ',' << t.product_index << ',' << to_string(t.t_piece) << ','
       << to_string(t.rqm) << ',' << fmt_full(t.lg) << ',' << fmt_full(t.dia_pb) << ','
       << fmt_full(t.dia_gb) << ',' << fmt_full(t.dia_moy) << ',' << t.q_trim << ','
       << fmt_full(t.u_trim) << ',' << t.q_rqm4 << ',' << t.q_rqm5 << ',' << t.q_rqm7 << ','
       << t.q_rqm << ',' << fmt_full(t.delta_t) << '\n';
  }
}

inline void write_traces_csv(const std::string& path, std::span<const ProductTrace> traces) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_traces_csv: cannot write " + path);
  write_traces_csv(os, traces);
}

inline PieceType piece_from_token(const std::string& s) {
  if (s == "CSMK1") return PieceType::CsmkPass1;
  if (s == "CSMK2") return PieceType::CsmkPass2;
  if (s == "MKV") return PieceType::Mkv;
  throw std::invalid_argument("unknown piece type token: " + s);
}

inline RqmRoute rqm_from_token(const std::string& s) {
  if (s == "RQM4") return RqmRoute::Rqm4;
  if (s == "RQM5") return RqmRoute::Rqm5;
  throw std::invalid_argument("unknown RQM token: " + s);
}

inline std::vector<ProductTrace> read_traces_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("read_traces_csv: empty file");
  std::vector<ProductTrace> traces;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 15) throw std::runtime_error("read_traces_csv: expected 15 fields");
    ProductTrace t;
    t.log_id = std::stoi(f[0]);
    t.product_index = std::stoi(f[1]);
    t.t_piece = piece_from_token(f[2]);
    t.rqm = rqm_from_token(f[3]);
    t.lg = std::stod(f[4]);
    t.dia_pb = std::stod(f[5]);
    t.dia_gb = std::stod(f[6]);
    t.dia_moy = std::stod(f[7]);
    t.q_trim = std::stoi(f[8]);
    t.u_trim = std::stod(f[9]);
    t.q_rqm4 = std::stoi(f[10]);
    t.q_rqm5 = std::stoi(f[11]);
    t.q_rqm7 = std::stoi(f[12]);
    t.q_rqm = std::stoi(f[13]);
    t.delta_t = std::stod(f[14]);
    traces.push_back(t);
  }
  return traces;
}

inline std::vector<ProductTrace> read_traces_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_traces_csv: cannot read " + path);
  return read_traces_csv(is);
}

// Dataset CSV: encoded feature columns in order, then the target column.
inline void write_dataset_csv(std::ostream& os, const Dataset& d) {
  for (std::size_t j = 0; j < d.n_cols; ++j) os << d.column_names[j] << ',';
  os << "delta_t\n";
  for (std::size_t i = 0; i < d.n_rows; ++i) {
    for (std::size_t j = 0; j < d.n_cols; ++j) os << fmt_full(d.at(i, j)) << ',';
    os << fmt_full(d.y[i]) << '\n';
  }
}

inline Dataset read_dataset_csv(std::istream& is, std::span<const ColumnKind> kinds) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("read_dataset_csv: empty file");
  auto header = split_csv_line(line);
  if (header.size() < 2 || header.back() != "delta_t")
    throw std::runtime_error("read_dataset_csv: expected trailing delta_t column");
  Dataset d;
  d.n_cols = header.size() - 1;
  if (kinds.size() != d.n_cols)
    throw std::invalid_argument("read_dataset_csv: column kind count mismatch");
  d.column_names.assign(header.begin(), header.end() - 1);
  d.column_kinds.assign(kinds.begin(), kinds.end());
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != d.n_cols + 1) throw std::runtime_error("read_dataset_csv: ragged row");
    for (std::size_t j = 0; j < d.n_cols; ++j) d.x.push_back(std::stod(f[j]));
    d.y.push_back(std::stod(f.back()));
    ++d.n_rows;
  }
  return d;
}

// Routings CSV: mo_id,station_1,station_2,...
inline std::vector<Routing> read_routings_csv(std::istream& is) {
  std::vector<Routing> routings;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto f = split_csv_line(line);
    if (f.size() < 2) throw std::runtime_error("read_routings_csv: routing needs >= 1 station");
    Routing r;
    r.mo_id = f[0];
    r.stations.assign(f.begin() + 1, f.end());
    routings.push_back(r);
  }
  return routings;
}

inline std::vector<Routing> read_routings_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_routings_csv: cannot read " + path);
  return read_routings_csv(is);
}

}  // namespace millreduce

#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include "millreduce/sawmill.hpp"

namespace millreduce {

// Plain key = value configuration text; '#' starts a comment. Unknown keys
// are an error so typos do not silently fall back to defaults.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& is) {
    KeyValueConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        if (line.find_first_not_of(" \t\r") != std::string::npos)
          throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key = value");
        continue;
      }
      cfg.values_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return cfg;
  }

  static KeyValueConfig parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read config file " + path);
    return parse(is);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  double number(const std::string& key, double fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    consumed_.insert(key);
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size())
      throw std::runtime_error("config key " + key + ": not a number: " + it->second);
    return v;
  }

  long integer(const std::string& key, long fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    consumed_.insert(key);
    std::size_t pos = 0;
    const long v = std::stol(it->second, &pos);
    if (pos != it->second.size())
      throw std::runtime_error("config key " + key + ": not an integer: " + it->second);
    return v;
  }

  std::string text(const std::string& key, const std::string& fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    consumed_.insert(key);
    return it->second;
  }

  void reject_unknown_keys() const {
    for (const auto& [k, v] : values_)
      if (!consumed_.count(k)) throw std::runtime_error("unknown config key: " + k);
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
};

inline SimConfig sim_config_from(KeyValueConfig& kv) {
  SimConfig c;
  c.n_logs = static_cast<int>(kv.integer("n_logs", c.n_logs));
  c.arrival_mean_s = kv.number("arrival_mean_s", c.arrival_mean_s);
  c.lg_lo = kv.number("lg_lo", c.lg_lo);
  c.lg_hi = kv.number("lg_hi", c.lg_hi);
  c.dia_pb_lo = kv.number("dia_pb_lo", c.dia_pb_lo);
  c.dia_pb_hi = kv.number("dia_pb_hi", c.dia_pb_hi);
  c.taper_cm_per_m = kv.number("taper_cm_per_m", c.taper_cm_per_m);
  c.route_dia_threshold = kv.number("route_dia_threshold", c.route_dia_threshold);
  c.route_balance_margin = static_cast<int>(kv.integer("route_balance_margin", c.route_balance_margin));
  c.rqm4_transit_s = kv.number("rqm4_transit_s", c.rqm4_transit_s);
  c.rqm5_transit_s = kv.number("rqm5_transit_s", c.rqm5_transit_s);
  c.rqm7_transit_s = kv.number("rqm7_transit_s", c.rqm7_transit_s);
  c.canter.lo = kv.number("canter_service_lo", c.canter.lo);
  c.canter.hi = kv.number("canter_service_hi", c.canter.hi);
  c.canter_lg_coef = kv.number("canter_lg_coef", c.canter_lg_coef);
  c.canter_dia_coef = kv.number("canter_dia_coef", c.canter_dia_coef);
  c.kockums.lo = kv.number("kockums_service_lo", c.kockums.lo);
  c.kockums.hi = kv.number("kockums_service_hi", c.kockums.hi);
  c.mkv.lo = kv.number("mkv_service_lo", c.mkv.lo);
  c.mkv.hi = kv.number("mkv_service_hi", c.mkv.hi);
  c.trimmer.lo = kv.number("trimmer_service_lo", c.trimmer.lo);
  c.trimmer.hi = kv.number("trimmer_service_hi", c.trimmer.hi);
  c.u_trim_window_s = kv.number("u_trim_window_s", c.u_trim_window_s);
  c.seed = static_cast<std::uint64_t>(kv.integer("seed", static_cast<long>(c.seed)));
  return c;
}

// Canonical text dump (used for provenance hashing and config echoes).
inline std::string sim_config_dump(const SimConfig& c) {
  std::ostringstream os;
  os << "n_logs = " << c.n_logs << '\n'
     << "arrival_mean_s = " << c.arrival_mean_s << '\n'
     << "lg_lo = " << c.lg_lo << '\n'
     << "lg_hi = " << c.lg_hi << '\n'
     << "dia_pb_lo = " << c.dia_pb_lo << '\n'
     << "dia_pb_hi = " << c.dia_pb_hi << '\n'
     << "taper_cm_per_m = " << c.taper_cm_per_m << '\n'
     << "route_dia_threshold = " << c.route_dia_threshold << '\n'
     << "route_balance_margin = " << c.route_balance_margin << '\n'
     << "rqm4_transit_s = " << c.rqm4_transit_s << '\n'
     << "rqm5_transit_s = " << c.rqm5_transit_s << '\n'
     << "rqm7_transit_s = " << c.rqm7_transit_s << '\n'
     << "canter_service_lo = " << c.canter.lo << '\n'
     << "canter_service_hi = " << c.canter.hi << '\n'
     << "canter_lg_coef = " << c.canter_lg_coef << '\n'
     << "canter_dia_coef = " << c.canter_dia_coef << '\n'
     << "kockums_service_lo = " << c.kockums.lo << '\n'
     << "kockums_service_hi = " << c.kockums.hi << '\n'
     << "mkv_service_lo = " << c.mkv.lo << '\n'
     << "mkv_service_hi = " << c.mkv.hi << '\n'
     << "trimmer_service_lo = " << c.trimmer.lo << '\n'
     << "trimmer_service_hi = " << c.trimmer.hi << '\n'
     << "u_trim_window_s = " << c.u_trim_window_s << '\n'
     << "seed = " << c.seed << '\n';
  return os.str();
}

}  // namespace millreduce

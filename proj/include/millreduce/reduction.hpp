#pragma once

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace millreduce {

// One manufacturing order's routing through work stations.
struct Routing {
  std::string mo_id;
  std::vector<std::string> stations;
};

// Per-period, per-station utilization in [0, 1]. The last period is the
// current planning horizon.
struct UtilizationHistory {
  std::vector<std::string> stations;
  std::vector<std::vector<double>> periods;  // periods[p][s]

  void validate() const {
    if (periods.empty()) throw std::invalid_argument("UtilizationHistory: no periods");
    for (const auto& p : periods) {
      if (p.size() != stations.size())
        throw std::invalid_argument("UtilizationHistory: ragged period row");
      for (double u : p)
        if (u < 0.0 || u > 1.0)
          throw std::invalid_argument("UtilizationHistory: utilization outside [0, 1]");
    }
  }
};

struct BottleneckClasses {
  std::set<std::string> structural;    // saturated in enough past periods
  std::set<std::string> conjunctural;  // saturated in the current period
};

// A station is a conjunctural bottleneck when it is saturated now, and a
// structural one when saturation covers at least `structural_fraction` of
// the recorded periods.
inline BottleneckClasses classify_bottlenecks(const UtilizationHistory& history,
                                              double saturation = 0.9,
                                              double structural_fraction = 0.5) {
  history.validate();
  if (!(saturation > 0.0 && saturation <= 1.0) ||
      !(structural_fraction > 0.0 && structural_fraction <= 1.0))
    throw std::invalid_argument("classify_bottlenecks: thresholds must be in (0, 1]");

  BottleneckClasses out;
  const auto& latest = history.periods.back();
  for (std::size_t s = 0; s < history.stations.size(); ++s) {
    if (latest[s] >= saturation) out.conjunctural.insert(history.stations[s]);
    std::size_t saturated = 0;
    for (const auto& period : history.periods) saturated += period[s] >= saturation;
    if (static_cast<double>(saturated) >=
        structural_fraction * static_cast<double>(history.periods.size()))
      out.structural.insert(history.stations[s]);
  }
  return out;
}

// Synchronization stations: non-bottleneck stations that appear in at least
// one bottleneck-using MO, chosen greedily so that the selected set covers
// every coverable MO that uses no bottleneck. Each round picks the candidate
// covering the most still-uncovered MOs; ties break by station name. The
// greedy loop runs until every coverable MO is covered, so it always reaches
// the maximum coverage an exhaustive search would certify.
inline std::set<std::string> synchronization_stations(const std::vector<Routing>& routings,
                                                      const std::set<std::string>& bottlenecks) {
  auto uses_bottleneck = [&](const Routing& r) {
    return std::any_of(r.stations.begin(), r.stations.end(),
                       [&](const std::string& s) { return bottlenecks.count(s) > 0; });
  };

  std::set<std::string> candidates;
  std::vector<const Routing*> to_cover;
  for (const Routing& r : routings) {
    if (uses_bottleneck(r)) {
      for (const std::string& s : r.stations)
        if (!bottlenecks.count(s)) candidates.insert(s);
    } else {
      to_cover.push_back(&r);
    }
  }

  std::set<std::string> chosen;
  std::vector<bool> covered(to_cover.size(), false);
  for (;;) {
    std::string best;
    std::size_t best_gain = 0;
    for (const std::string& c : candidates) {
      if (chosen.count(c)) continue;
      std::size_t gain = 0;
      for (std::size_t m = 0; m < to_cover.size(); ++m) {
        if (covered[m]) continue;
        if (std::find(to_cover[m]->stations.begin(), to_cover[m]->stations.end(), c) !=
            to_cover[m]->stations.end())
          ++gain;
      }
      if (gain > best_gain || (gain == best_gain && gain > 0 && c < best)) {
        best_gain = gain;
        best = c;
      }
    }
    if (best_gain == 0) break;
    chosen.insert(best);
    for (std::size_t m = 0; m < to_cover.size(); ++m) {
      if (covered[m]) continue;
      if (std::find(to_cover[m]->stations.begin(), to_cover[m]->stations.end(), best) !=
          to_cover[m]->stations.end())
        covered[m] = true;
    }
  }
  return chosen;
}

}  // namespace millreduce

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>

#include "millreduce/reduced.hpp"
#include "millreduce/sawmill.hpp"

using namespace millreduce;

namespace {

// Deterministic single-log configuration: constant service times, fixed
// transits, everything routed to RQM4.
SimConfig deterministic_config() {
  SimConfig cfg;
  cfg.n_logs = 1;
  cfg.route_dia_threshold = 0.0;  // dia_moy >= 0: always RQM4
  cfg.rqm4_transit_s = 100.0;
  cfg.rqm5_transit_s = 500.0;
  cfg.rqm7_transit_s = 45.0;
  cfg.canter = {12.0, 12.0};
  cfg.canter_lg_coef = 0.0;
  cfg.canter_dia_coef = 0.0;
  cfg.kockums = {6.0, 6.0};
  cfg.mkv = {15.0, 15.0};
  cfg.trimmer = {5.0, 5.0};
  cfg.seed = 77;
  return cfg;
}

}  // namespace

TEST_CASE("generate_logs: counts, taper, ordering, determinism") {
  SimConfig cfg;
  cfg.n_logs = 1825;
  const auto logs = generate_logs(cfg);
  REQUIRE(logs.size() == 1825);
  for (std::size_t i = 0; i < logs.size(); ++i) {
    REQUIRE(logs[i].dia_pb <= logs[i].dia_moy);
    REQUIRE(logs[i].dia_moy <= logs[i].dia_gb);
    REQUIRE(logs[i].lg > 0);
    if (i > 0) REQUIRE(logs[i].arrival_time > logs[i - 1].arrival_time);
    REQUIRE(logs[i].dia_gb ==
            Catch::Approx(logs[i].dia_pb + cfg.taper_cm_per_m * logs[i].lg).margin(1e-12));
    REQUIRE(logs[i].dia_moy == Catch::Approx(0.5 * (logs[i].dia_pb + logs[i].dia_gb)).margin(1e-12));
  }

  SimConfig flat = cfg;
  flat.taper_cm_per_m = 0.0;
  for (const auto& log : generate_logs(flat)) {
    REQUIRE(log.dia_pb == log.dia_gb);
    REQUIRE(log.dia_pb == log.dia_moy);
  }

  const auto again = generate_logs(cfg);
  for (std::size_t i = 0; i < logs.size(); ++i) {
    REQUIRE(logs[i].arrival_time == again[i].arrival_time);
    REQUIRE(logs[i].lg == again[i].lg);
    REQUIRE(logs[i].dia_pb == again[i].dia_pb);
  }
}

TEST_CASE("single deterministic log: hand-summed path times") {
  const SimConfig cfg = deterministic_config();
  const auto result = simulate_full(cfg);
  REQUIRE(result.traces.size() == 7);

  // Hand sums. Entry at t0. Conveyor RQM4 takes 100 s, each canter pass
  // 12 s, kockums 6 s per piece, RQM7 45 s, MKV 15 s.
  //   pass 1 pieces reach kockums at t0+112: deltas 118 and 124
  //   log re-enters canter at t0+157, done t0+169: deltas 175 and 181
  //   MKV takes the cant t0+169..184: three pieces at delta 184
  std::map<int, double> expected = {{1, 118.0}, {2, 124.0}, {3, 175.0}, {4, 181.0},
                                    {5, 184.0}, {6, 184.0}, {7, 184.0}};
  for (const auto& tr : result.traces) {
    REQUIRE(tr.delta_t == Catch::Approx(expected.at(tr.product_index)).margin(1e-9));
    REQUIRE(tr.q_trim == 0);
    REQUIRE(tr.u_trim == 0.0);
    REQUIRE(tr.q_rqm4 == 0);
    REQUIRE(tr.q_rqm5 == 0);
    REQUIRE(tr.q_rqm7 == 0);
    REQUIRE(tr.rqm == RqmRoute::Rqm4);
  }
}

TEST_CASE("cutting plan conservation") {
  SimConfig cfg;
  cfg.n_logs = 200;
  cfg.seed = 5;
  const auto result = simulate_full(cfg);
  REQUIRE(result.traces.size() == 200 * 7);
  std::map<PieceType, int> count;
  for (const auto& tr : result.traces) count[tr.t_piece]++;
  REQUIRE(count[PieceType::CsmkPass1] == 2 * 200);
  REQUIRE(count[PieceType::CsmkPass2] == 2 * 200);
  REQUIRE(count[PieceType::Mkv] == 3 * 200);
}

TEST_CASE("slower RQM4 conveyor shows up in the route's delays") {
  SimConfig cfg;
  cfg.n_logs = 300;
  cfg.seed = 8;
  cfg.rqm4_transit_s = 10.0 * cfg.rqm5_transit_s;
  const auto result = simulate_full(cfg);
  double sum4 = 0, sum5 = 0;
  int n4 = 0, n5 = 0;
  for (const auto& tr : result.traces) {
    if (tr.rqm == RqmRoute::Rqm4) {
      sum4 += tr.delta_t;
      ++n4;
    } else {
      sum5 += tr.delta_t;
      ++n5;
    }
  }
  REQUIRE(n4 > 0);
  REQUIRE(n5 > 0);
  REQUIRE(sum4 / n4 > sum5 / n5);
}

TEST_CASE("every queue serves in FIFO order") {
  SimConfig cfg;
  cfg.n_logs = 150;
  cfg.seed = 21;
  const auto result = simulate_full(cfg);
  for (int s = 0; s < kNumStations; ++s) {
    const auto& records = result.services[s];
    REQUIRE_FALSE(records.empty());
    for (std::size_t i = 1; i < records.size(); ++i) {
      REQUIRE(records[i].enqueue_time >= records[i - 1].enqueue_time);
      REQUIRE(records[i].start_time >= records[i - 1].done_time - 1e-12);
    }
  }
}

TEST_CASE("utilizations match an interval re-scan") {
  SimConfig cfg;
  cfg.n_logs = 120;
  cfg.seed = 3;
  const auto result = simulate_full(cfg);
  const auto util = station_utilizations(result);
  for (int s = 0; s < kNumStations; ++s) {
    double busy = 0.0;
    for (const auto& rec : result.services[s]) {
      REQUIRE(rec.done_time >= rec.start_time);
      busy += std::min(rec.done_time, result.end_time) - std::min(rec.start_time, result.end_time);
    }
    const double expected = busy / result.end_time;
    REQUIRE(util.at(to_string(static_cast<StationId>(s))) ==
            Catch::Approx(expected).epsilon(0).margin(1e-12));
    REQUIRE(expected >= 0.0);
    REQUIRE(expected <= 1.0);
  }
}

TEST_CASE("utilization of an empty run is zero; bad horizon rejected") {
  SimResult empty;
  const auto util = station_utilizations(empty, 100.0);
  for (const auto& [name, u] : util) REQUIRE(u == 0.0);
  REQUIRE_THROWS_AS(station_utilizations(empty, 0.0), std::invalid_argument);
}

TEST_CASE("trace invariants over seeded runs") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    SimConfig cfg;
    cfg.n_logs = 80;
    cfg.seed = seed;
    const auto result = simulate_full(cfg);
    REQUIRE(result.traces.size() == 80 * 7);
    for (const auto& tr : result.traces) {
      REQUIRE(tr.q_rqm == tr.q_rqm4 + tr.q_rqm5 + tr.q_rqm7);
      REQUIRE(tr.delta_t > 0.0);
      REQUIRE(tr.u_trim >= 0.0);
      REQUIRE(tr.u_trim <= 1.0);
      REQUIRE(tr.delta_t >= min_path_time(cfg, tr.t_piece) - 1e-9);
    }
  }
}

TEST_CASE("traces are ordered by trimmer-queue entry") {
  SimConfig cfg;
  cfg.n_logs = 100;
  cfg.seed = 13;
  const auto result = simulate_full(cfg);
  // Trimmer enqueue times keyed by (log, product) give the entry instants.
  std::map<std::pair<int, int>, double> entry;
  for (const auto& rec : result.services[static_cast<int>(StationId::Trimmer)])
    entry[{rec.log_id, rec.slot}] = rec.enqueue_time;
  double last = -1.0;
  for (const auto& tr : result.traces) {
    const double t = entry.at({tr.log_id, tr.product_index});
    REQUIRE(t >= last - 1e-12);
    last = t;
  }
}

TEST_CASE("simulation is deterministic per seed") {
  SimConfig cfg;
  cfg.n_logs = 60;
  cfg.seed = 99;
  const auto a = simulate_full(cfg);
  const auto b = simulate_full(cfg);
  REQUIRE(a.traces.size() == b.traces.size());
  for (std::size_t i = 0; i < a.traces.size(); ++i) {
    REQUIRE(a.traces[i].log_id == b.traces[i].log_id);
    REQUIRE(a.traces[i].product_index == b.traces[i].product_index);
    REQUIRE(a.traces[i].delta_t == b.traces[i].delta_t);
    REQUIRE(a.traces[i].q_trim == b.traces[i].q_trim);
    REQUIRE(a.traces[i].u_trim == b.traces[i].u_trim);
  }
}

TEST_CASE("zero service times are rejected") {
  SimConfig cfg;
  cfg.trimmer = {0.0, 0.0};
  REQUIRE_THROWS_AS(simulate_full(cfg), std::invalid_argument);
  SimConfig cfg2;
  cfg2.n_logs = 0;
  REQUIRE_THROWS_AS(cfg2.validate(), std::invalid_argument);
}

TEST_CASE("default configuration keeps the trimmer as the busiest station") {
  SimConfig cfg;
  cfg.n_logs = 400;
  for (std::uint64_t seed : {1ULL, 5ULL, 11ULL}) {
    cfg.seed = seed;
    const auto util = station_utilizations(simulate_full(cfg));
    const double trimmer = util.at("trimmer");
    for (const auto& [name, u] : util)
      if (name != "trimmer") REQUIRE(trimmer > u);
  }
}

TEST_CASE("queue balancing override steers to the shorter conveyor") {
  LogEntity log;
  log.dia_moy = 40.0;  // threshold rule says RQM4
  SimConfig cfg;
  REQUIRE(route_for(log, cfg, 5, 5) == RqmRoute::Rqm4);
  cfg.route_balance_margin = 3;
  REQUIRE(route_for(log, cfg, 9, 2) == RqmRoute::Rqm5);
  REQUIRE(route_for(log, cfg, 2, 9) == RqmRoute::Rqm4);
  REQUIRE(route_for(log, cfg, 5, 4) == RqmRoute::Rqm4);  // within the margin
}

TEST_CASE("reduced run with a replay oracle reproduces the full arrival stream") {
  SimConfig cfg;
  cfg.n_logs = 120;
  cfg.seed = 17;
  const auto full = simulate_full(cfg);

  // Perfect oracle: replay each product's recorded delay.
  std::map<std::pair<int, int>, double> recorded;
  for (const auto& tr : full.traces) recorded[{tr.log_id, tr.product_index}] = tr.delta_t;
  const auto reduced = simulate_reduced_with(cfg, [&](const ProductTrace& tr) {
    return recorded.at({tr.log_id, tr.product_index});
  });

  // The reduced arrival sequence then matches the full run's trimmer-queue
  // entries product for product, in the same order.
  REQUIRE(reduced.arrivals.size() == full.traces.size());
  std::map<std::pair<int, int>, double> log_entry;
  const auto& trimmer = full.services[static_cast<int>(StationId::Trimmer)];
  std::map<std::pair<int, int>, double> full_entry;
  for (const auto& rec : trimmer) full_entry[{rec.log_id, rec.slot}] = rec.enqueue_time;
  for (std::size_t i = 0; i < reduced.arrivals.size(); ++i) {
    const auto& pa = reduced.arrivals[i];
    const auto& tr = full.traces[i];
    REQUIRE(pa.log_id == tr.log_id);
    REQUIRE(pa.product_index == tr.product_index);
    REQUIRE(pa.predicted_arrival ==
            Catch::Approx(full_entry.at({pa.log_id, pa.product_index})).epsilon(0).margin(1e-9));
  }
}

TEST_CASE("reduced run touches only arrivals and trimmer work") {
  SimConfig cfg;
  cfg.n_logs = 50;
  cfg.seed = 23;
  const auto reduced = simulate_reduced_with(cfg, [](const ProductTrace&) { return 250.0; });
  REQUIRE(reduced.event_census.size() == 3);
  REQUIRE(reduced.event_census.at("log_arrival") == 50);
  REQUIRE(reduced.event_census.at("trimmer_arrival") == 350);
  REQUIRE(reduced.event_census.at("trimmer_done") == 350);
}

TEST_CASE("min path time is a true lower bound per category") {
  SimConfig cfg;
  REQUIRE(min_path_time(cfg, PieceType::CsmkPass1) < min_path_time(cfg, PieceType::CsmkPass2));
  REQUIRE(min_path_time(cfg, PieceType::CsmkPass2) < min_path_time(cfg, PieceType::Mkv) +
                                                         cfg.kockums.lo);
}

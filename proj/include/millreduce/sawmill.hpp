#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <map>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "millreduce/rng.hpp"

namespace millreduce {

// Product category: which saw and which pass created the piece.
enum class PieceType : std::uint8_t { CsmkPass1 = 1, CsmkPass2 = 2, Mkv = 3 };
// Which infeed conveyor the log was steered to.
enum class RqmRoute : std::uint8_t { Rqm4 = 4, Rqm5 = 5 };

inline const char* to_string(PieceType t) {
  switch (t) {
    case PieceType::CsmkPass1: return "CSMK1";
    case PieceType::CsmkPass2: return "CSMK2";
    case PieceType::Mkv: return "MKV";
  }
  return "?";
}
inline const char* to_string(RqmRoute r) { return r == RqmRoute::Rqm4 ? "RQM4" : "RQM5"; }

struct LogEntity {
  int id = 0;
  double arrival_time = 0.0;  // seconds
  double lg = 0.0;            // length, m
  double dia_pb = 0.0;        // small-end diameter, cm
  double dia_gb = 0.0;        // big-end diameter, cm
  double dia_moy = 0.0;       // mean diameter, cm
};

// One product of the cutting plan with the process snapshot taken at its
// log's entry instant, and the measured entry-to-trimmer-queue delay.
struct ProductTrace {
  int log_id = 0;
  int product_index = 0;  // 1..7: 1-2 CSMK pass 1, 3-4 CSMK pass 2, 5-7 MKV
  PieceType t_piece = PieceType::CsmkPass1;
  RqmRoute rqm = RqmRoute::Rqm4;
  double lg = 0.0, dia_pb = 0.0, dia_gb = 0.0, dia_moy = 0.0;
  int q_trim = 0;
  double u_trim = 0.0;
  int q_rqm4 = 0, q_rqm5 = 0, q_rqm7 = 0;
  int q_rqm = 0;
  double delta_t = 0.0;  // seconds, > 0
};

struct ServiceDist {
  double lo = 0.0, hi = 0.0;  // uniform bounds, seconds
  double mean() const { return 0.5 * (lo + hi); }
};

struct SimConfig {
  int n_logs = 1825;              // 1825 logs x 7 products = 12775 traces
  double arrival_mean_s = 45.0;   // exponential inter-arrival mean
  double lg_lo = 3.0, lg_hi = 6.0;
  double dia_pb_lo = 20.0, dia_pb_hi = 45.0;
  double taper_cm_per_m = 1.2;    // dia_gb = dia_pb + taper * lg

  // Routing: dia_moy >= threshold goes to RQM4. With balance_margin > 0 the
  // shorter RQM queue wins whenever the queue lengths differ by more.
  double route_dia_threshold = 32.0;
  int route_balance_margin = 0;

  double rqm4_transit_s = 60.0;
  double rqm5_transit_s = 480.0;  // the slow infeed; the two must differ
  double rqm7_transit_s = 45.0;

  ServiceDist canter{9.0, 15.0};
  double canter_lg_coef = 0.5;    // s per m of log length
  double canter_dia_coef = 0.1;   // s per cm of mean diameter
  ServiceDist kockums{4.0, 8.0};
  ServiceDist mkv{10.0, 20.0};
  ServiceDist trimmer{4.6, 7.0};

  double u_trim_window_s = 600.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (n_logs < 1) throw std::invalid_argument("SimConfig: n_logs must be >= 1");
    if (arrival_mean_s <= 0) throw std::invalid_argument("SimConfig: arrival mean must be positive");
    if (lg_lo <= 0 || lg_hi < lg_lo) throw std::invalid_argument("SimConfig: bad length range");
    if (dia_pb_lo <= 0 || dia_pb_hi < dia_pb_lo) throw std::invalid_argument("SimConfig: bad diameter range");
    if (taper_cm_per_m < 0) throw std::invalid_argument("SimConfig: negative taper");
    if (rqm4_transit_s <= 0 || rqm5_transit_s <= 0 || rqm7_transit_s <= 0)
      throw std::invalid_argument("SimConfig: transit times must be positive");
    for (const ServiceDist* d : {&canter, &kockums, &mkv, &trimmer}) {
      if (d->lo <= 0 || d->hi < d->lo)
        throw std::invalid_argument("SimConfig: service times must be positive");
    }
    if (canter_lg_coef < 0 || canter_dia_coef < 0)
      throw std::invalid_argument("SimConfig: negative canter coefficient");
    if (u_trim_window_s <= 0) throw std::invalid_argument("SimConfig: U_trim window must be positive");
  }
};

inline std::vector<LogEntity> generate_logs(const SimConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::vector<LogEntity> logs;
  logs.reserve(static_cast<std::size_t>(cfg.n_logs));
  double t = 0.0;
  for (int i = 0; i < cfg.n_logs; ++i) {
    LogEntity log;
    log.id = i;
    t += rng.exponential(cfg.arrival_mean_s);
    log.arrival_time = t;
    log.lg = rng.uniform(cfg.lg_lo, cfg.lg_hi);
    log.dia_pb = rng.uniform(cfg.dia_pb_lo, cfg.dia_pb_hi);
    log.dia_gb = log.dia_pb + cfg.taper_cm_per_m * log.lg;
    log.dia_moy = 0.5 * (log.dia_pb + log.dia_gb);
    logs.push_back(log);
  }
  return logs;
}

inline RqmRoute route_for(const LogEntity& log, const SimConfig& cfg, int q4, int q5) {
  if (cfg.route_balance_margin > 0 && std::abs(q4 - q5) > cfg.route_balance_margin)
    return q4 < q5 ? RqmRoute::Rqm4 : RqmRoute::Rqm5;
  return log.dia_moy >= cfg.route_dia_threshold ? RqmRoute::Rqm4 : RqmRoute::Rqm5;
}

enum class StationId : int { Canter = 0, Kockums = 1, Mkv = 2, Trimmer = 3 };
inline const char* to_string(StationId s) {
  switch (s) {
    case StationId::Canter: return "canter";
    case StationId::Kockums: return "kockums";
    case StationId::Mkv: return "mkv";
    case StationId::Trimmer: return "trimmer";
  }
  return "?";
}
inline constexpr int kNumStations = 4;

// One completed service, kept for utilization accounting and FIFO checks.
struct ServiceRecord {
  int log_id = 0;
  int slot = 0;  // product index, or canter pass
  double enqueue_time = 0.0;
  double start_time = 0.0;
  double done_time = 0.0;
};

struct SimResult {
  std::vector<ProductTrace> traces;  // ordered by trimmer-queue entry
  std::vector<ServiceRecord> services[kNumStations];
  double end_time = 0.0;
  double wall_seconds = 0.0;
};

// Lower bound on delta_t for a product category under a given config: the
// fastest conveyor plus the service-time minima along the category's route,
// with an empty system. Used as a sanity floor by tests.
inline double min_path_time(const SimConfig& cfg, PieceType t) {
  const double rqm_min = std::min(cfg.rqm4_transit_s, cfg.rqm5_transit_s);
  const double canter_min =
      cfg.canter.lo + cfg.canter_lg_coef * cfg.lg_lo + cfg.canter_dia_coef * cfg.dia_pb_lo;
  switch (t) {
    case PieceType::CsmkPass1:
      return rqm_min + canter_min + cfg.kockums.lo;
    case PieceType::CsmkPass2:
      return rqm_min + canter_min + cfg.rqm7_transit_s + canter_min + cfg.kockums.lo;
    case PieceType::Mkv:
      return rqm_min + canter_min + cfg.rqm7_transit_s + canter_min + cfg.mkv.lo;
  }
  return 0.0;
}

namespace detail {

// Single-server FIFO station; keeps every completed service for later
// utilization scans and maintains a trailing-window busy ledger for U_trim.
struct Station {
  struct Waiting {
    int log_id;
    int slot;
    double enqueue_time;
  };
  std::deque<Waiting> queue;
  bool busy = false;
  double busy_since = 0.0;
  std::vector<ServiceRecord>* log = nullptr;

  int queue_length() const { return static_cast<int>(queue.size()); }

  // Busy fraction inside [t - window, t]. A record is appended when its
  // service starts, so an in-progress service is already in the log and the
  // min(done, t) clip accounts for it.
  double utilization_window(double t, double window,
                            std::span<const ServiceRecord> records) const {
    const double w0 = std::max(0.0, t - window);
    if (t <= w0) return 0.0;
    double busy_s = 0.0;
    for (auto it = records.rbegin(); it != records.rend(); ++it) {
      if (it->done_time <= w0) break;
      busy_s += std::max(0.0, std::min(it->done_time, t) - std::max(it->start_time, w0));
    }
    return busy_s / (t - w0);
  }
};

}  // namespace detail

// Full discrete-event run of the line:
//
//   entry scan -> RQM4|RQM5 -> canter pass 1 (2 secondary products -> kockums)
//   -> RQM7 -> canter pass 2 (2 secondary products -> kockums)
//   -> MKV (3 main products) ; every product ends in the trimmer queue,
//   where delta_t is measured, and the trimmer serves it.
//
// Deterministic for a given config+seed; ties in the event calendar break
// by insertion sequence.
inline SimResult simulate_full(const SimConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  const std::vector<LogEntity> logs = generate_logs(cfg);
  Rng service_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  enum class Ev : std::uint8_t {
    LogArrival,
    ConveyorReady,  // aux = canter pass (1 or 2)
    CanterDone,     // aux = pass
    KockumsDone,    // aux = product index
    MkvDone,
    TrimmerDone
  };
  struct Event {
    double t;
    std::uint64_t seq;
    Ev kind;
    int log_id;
    int aux;
    bool operator>(const Event& o) const {
      return t != o.t ? t > o.t : seq > o.seq;
    }
  };
  std::priority_queue<Event, std::vector<Event>, std::greater<>> calendar;
  std::uint64_t seq = 0;
  auto schedule = [&](double t, Ev kind, int log_id, int aux) {
    calendar.push(Event{t, seq++, kind, log_id, aux});
  };

  struct LogState {
    RqmRoute route = RqmRoute::Rqm4;
    double entry = 0.0;
  };
  std::vector<LogState> state(logs.size());

  SimResult result;
  result.traces.reserve(logs.size() * 7);

  detail::Station canter, kockums, mkv, trimmer;
  canter.log = &result.services[static_cast<int>(StationId::Canter)];
  kockums.log = &result.services[static_cast<int>(StationId::Kockums)];
  mkv.log = &result.services[static_cast<int>(StationId::Mkv)];
  trimmer.log = &result.services[static_cast<int>(StationId::Trimmer)];

  int q_rqm4 = 0, q_rqm5 = 0, q_rqm7 = 0;

  // Per-log trace skeletons; delta_t filled at trimmer-queue entry.
  std::vector<std::array<ProductTrace, 7>> traces(logs.size());

  auto canter_service = [&](const LogEntity& log) {
    return service_rng.uniform(cfg.canter.lo, cfg.canter.hi) +
           cfg.canter_lg_coef * log.lg + cfg.canter_dia_coef * log.dia_moy;
  };

  auto start_canter = [&](double now) {
    if (canter.busy || canter.queue.empty()) return;
    auto job = canter.queue.front();
    canter.queue.pop_front();
    const int pass = job.slot;
    if (pass == 1) {
      (state[static_cast<std::size_t>(job.log_id)].route == RqmRoute::Rqm4 ? q_rqm4 : q_rqm5)--;
    } else {
      --q_rqm7;
    }
    canter.busy = true;
    canter.busy_since = now;
    const double s = canter_service(logs[static_cast<std::size_t>(job.log_id)]);
    canter.log->push_back({job.log_id, pass, job.enqueue_time, now, now + s});
    schedule(now + s, Ev::CanterDone, job.log_id, pass);
  };
  auto start_kockums = [&](double now) {
    if (kockums.busy || kockums.queue.empty()) return;
    auto job = kockums.queue.front();
    kockums.queue.pop_front();
    kockums.busy = true;
    kockums.busy_since = now;
    const double s = service_rng.uniform(cfg.kockums.lo, cfg.kockums.hi);
    kockums.log->push_back({job.log_id, job.slot, job.enqueue_time, now, now + s});
    schedule(now + s, Ev::KockumsDone, job.log_id, job.slot);
  };
  auto start_mkv = [&](double now) {
    if (mkv.busy || mkv.queue.empty()) return;
    auto job = mkv.queue.front();
    mkv.queue.pop_front();
    mkv.busy = true;
    mkv.busy_since = now;
    const double s = service_rng.uniform(cfg.mkv.lo, cfg.mkv.hi);
    mkv.log->push_back({job.log_id, job.slot, job.enqueue_time, now, now + s});
    schedule(now + s, Ev::MkvDone, job.log_id, job.slot);
  };
  auto start_trimmer = [&](double now) {
    if (trimmer.busy || trimmer.queue.empty()) return;
    auto job = trimmer.queue.front();
    trimmer.queue.pop_front();
    trimmer.busy = true;
    trimmer.busy_since = now;
    const double s = service_rng.uniform(cfg.trimmer.lo, cfg.trimmer.hi);
    trimmer.log->push_back({job.log_id, job.slot, job.enqueue_time, now, now + s});
    schedule(now + s, Ev::TrimmerDone, job.log_id, job.slot);
  };

  auto enter_trimmer_queue = [&](double now, int log_id, int product_index) {
    ProductTrace& tr = traces[static_cast<std::size_t>(log_id)][static_cast<std::size_t>(product_index - 1)];
    tr.delta_t = now - state[static_cast<std::size_t>(log_id)].entry;
    result.traces.push_back(tr);
    trimmer.queue.push_back({log_id, product_index, now});
    start_trimmer(now);
  };

  for (const LogEntity& log : logs)
    schedule(log.arrival_time, Ev::LogArrival, log.id, 0);

  while (!calendar.empty()) {
    const Event ev = calendar.top();
    calendar.pop();
    const double now = ev.t;
    result.end_time = now;
    const auto lid = static_cast<std::size_t>(ev.log_id);

    switch (ev.kind) {
      case Ev::LogArrival: {
        const LogEntity& log = logs[lid];
        LogState& st = state[lid];
        st.entry = now;
        st.route = route_for(log, cfg, q_rqm4, q_rqm5);

        // Snapshot of the process variables at the log's entry instant,
        // shared by all 7 of its products.
        ProductTrace base;
        base.log_id = log.id;
        base.rqm = st.route;
        base.lg = log.lg;
        base.dia_pb = log.dia_pb;
        base.dia_gb = log.dia_gb;
        base.dia_moy = log.dia_moy;
        base.q_trim = trimmer.queue_length();
        base.u_trim = trimmer.utilization_window(now, cfg.u_trim_window_s, *trimmer.log);
        base.q_rqm4 = q_rqm4;
        base.q_rqm5 = q_rqm5;
        base.q_rqm7 = q_rqm7;
        base.q_rqm = q_rqm4 + q_rqm5 + q_rqm7;
        for (int k = 0; k < 7; ++k) {
          ProductTrace tr = base;
          tr.product_index = k + 1;
          tr.t_piece = k < 2 ? PieceType::CsmkPass1 : (k < 4 ? PieceType::CsmkPass2 : PieceType::Mkv);
          traces[lid][static_cast<std::size_t>(k)] = tr;
        }

        (st.route == RqmRoute::Rqm4 ? q_rqm4 : q_rqm5)++;
        const double transit = st.route == RqmRoute::Rqm4 ? cfg.rqm4_transit_s : cfg.rqm5_transit_s;
        schedule(now + transit, Ev::ConveyorReady, log.id, 1);
        break;
      }
      case Ev::ConveyorReady: {
        canter.queue.push_back({ev.log_id, ev.aux, now});
        start_canter(now);
        break;
      }
      case Ev::CanterDone: {
        canter.busy = false;
        if (ev.aux == 1) {
          kockums.queue.push_back({ev.log_id, 1, now});
          kockums.queue.push_back({ev.log_id, 2, now});
          start_kockums(now);
          ++q_rqm7;
          schedule(now + cfg.rqm7_transit_s, Ev::ConveyorReady, ev.log_id, 2);
        } else {
          kockums.queue.push_back({ev.log_id, 3, now});
          kockums.queue.push_back({ev.log_id, 4, now});
          start_kockums(now);
          mkv.queue.push_back({ev.log_id, 5, now});
          start_mkv(now);
        }
        start_canter(now);
        break;
      }
      case Ev::KockumsDone: {
        kockums.busy = false;
        enter_trimmer_queue(now, ev.log_id, ev.aux);
        start_kockums(now);
        break;
      }
      case Ev::MkvDone: {
        mkv.busy = false;
        for (int k = 5; k <= 7; ++k) enter_trimmer_queue(now, ev.log_id, k);
        start_mkv(now);
        break;
      }
      case Ev::TrimmerDone: {
        trimmer.busy = false;
        start_trimmer(now);
        break;
      }
    }
  }

  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// Busy fraction per station over [0, horizon], from the recorded services.
inline std::map<std::string, double> station_utilizations(const SimResult& result,
                                                          double horizon) {
  if (horizon <= 0.0) throw std::invalid_argument("station_utilizations: horizon must be positive");
  std::map<std::string, double> util;
  for (int s = 0; s < kNumStations; ++s) {
    double busy = 0.0;
    for (const ServiceRecord& r : result.services[s])
      busy += std::max(0.0, std::min(r.done_time, horizon) - std::min(r.start_time, horizon));
    util[to_string(static_cast<StationId>(s))] = busy / horizon;
  }
  return util;
}

inline std::map<std::string, double> station_utilizations(const SimResult& result) {
  return station_utilizations(result, result.end_time);
}

}  // namespace millreduce

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "millreduce/dataset.hpp"
#include "millreduce/encoding.hpp"
#include "millreduce/mlp.hpp"
#include "millreduce/sawmill.hpp"

namespace millreduce {

struct PredictedArrival {
  int log_id = 0;
  int product_index = 0;
  PieceType t_piece = PieceType::CsmkPass1;
  RqmRoute rqm = RqmRoute::Rqm4;
  double log_entry = 0.0;
  double predicted_arrival = 0.0;  // trimmer-queue entry, seconds
};

struct ReducedResult {
  std::vector<PredictedArrival> arrivals;       // ordered by predicted arrival
  std::vector<ServiceRecord> trimmer_services;  // the one station still simulated
  std::map<std::string, std::size_t> event_census;
  double end_time = 0.0;
  double wall_seconds = 0.0;
};

// Maps a product's feature snapshot (dimensions, queue state, T_piece,
// route) to a predicted entry-to-trimmer-queue delay in seconds.
using DelayPredictor = std::function<double(const ProductTrace&)>;

// The reduced line of the reduction algorithm's final step: everything
// between the entry scan and the trimmer queue is replaced by the delay
// predictor, and only the trimmer survives. Logs arrive exactly as in the
// full model (same seed, same stream); each product's trimmer-queue entry
// is predicted as log entry + predict(features). Because the trimmer is a
// single FIFO server fed by known arrival instants, its services follow the
// rolling recurrence start = max(arrival, previous completion) and no event
// calendar is needed at all; the run touches nothing but log arrivals and
// trimmer work.
//
// The queue/utilization features come from the reduced model's own state:
// Q_trim and U_trim from the simulated trimmer, and the RQM conveyor counts
// from a deterministic fluid replica of the canter driven only by scanner
// data (dimensions, routing) and mean service times.
template <typename Predictor>
ReducedResult simulate_reduced_with(const SimConfig& cfg, Predictor&& predict) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<LogEntity> logs = generate_logs(cfg);
  Rng service_rng(cfg.seed ^ 0x5851f42d4c957f2dULL);

  ReducedResult result;
  result.arrivals.reserve(logs.size() * 7);
  result.trimmer_services.reserve(logs.size() * 7);

  // --- trimmer: rolling single-server FIFO ---------------------------------
  struct Batch {
    double arrival;
    std::uint64_t seq;
    int log_id;
    int first_index;  // product index of the first piece in the batch
    int count;
    bool operator>(const Batch& o) const {
      return arrival != o.arrival ? arrival > o.arrival : seq > o.seq;
    }
  };
  std::priority_queue<Batch, std::vector<Batch>, std::greater<>> pending;
  std::uint64_t batch_seq = 0;
  double trimmer_free = 0.0;
  auto& services = result.trimmer_services;
  std::vector<double> start_times;          // non-decreasing
  std::vector<double> busy_prefix = {0.0};  // cumulative service duration
  std::size_t trimmer_done_count = 0, trimmer_arrival_count = 0;

  auto serve_until = [&](double now) {
    while (!pending.empty() && pending.top().arrival <= now) {
      const Batch b = pending.top();
      pending.pop();
      for (int k = 0; k < b.count; ++k) {
        const double start = std::max(b.arrival, trimmer_free);
        const double done = start + service_rng.uniform(cfg.trimmer.lo, cfg.trimmer.hi);
        services.push_back({b.log_id, b.first_index + k, b.arrival, start, done});
        start_times.push_back(start);
        busy_prefix.push_back(busy_prefix.back() + (done - start));
        trimmer_free = done;
        ++trimmer_done_count;
      }
      trimmer_arrival_count += static_cast<std::size_t>(b.count);
    }
  };

  // Waiting products at `now`: services are appended in start order, so the
  // queued ones are exactly the tail with start > now.
  auto q_trim_at = [&](double now) {
    const auto it = std::upper_bound(start_times.begin(), start_times.end(), now);
    return static_cast<int>(start_times.end() - it);
  };
  // The single server's busy intervals are disjoint, so cumulative busy time
  // before t is a prefix sum minus the tail of the one straddling interval.
  auto busy_before = [&](double t) {
    const auto it = std::upper_bound(start_times.begin(), start_times.end(), t);
    const auto k = static_cast<std::size_t>(it - start_times.begin());
    if (k == 0) return 0.0;
    return busy_prefix[k] - std::max(0.0, services[k - 1].done_time - t);
  };
  auto u_trim_at = [&](double now) {
    const double w0 = std::max(0.0, now - cfg.u_trim_window_s);
    if (now <= w0) return 0.0;
    return (busy_before(now) - busy_before(w0)) / (now - w0);
  };

  // --- surrogate RQM counts: fluid canter replica --------------------------
  struct VirtualCanter {
    struct Job {
      double ready;
      std::uint64_t order;
      int log_id;
      int pass;
      bool operator>(const Job& o) const {
        return ready != o.ready ? ready > o.ready : order > o.order;
      }
    };
    std::priority_queue<Job, std::vector<Job>, std::greater<>> jobs;
    std::priority_queue<double, std::vector<double>, std::greater<>> pass1_completions;
    std::uint64_t order = 0;
    double free_at = 0.0;
    double rqm7_transit = 0.0;
    int q4 = 0, q5 = 0, q7 = 0;
    std::vector<double> mean_service;  // per log
    std::vector<bool> routed_rqm4;     // per log

    void admit(int log_id, bool rqm4, double ready) {
      (rqm4 ? q4 : q5)++;
      jobs.push({ready, order++, log_id, 1});
    }

    // Runs virtual jobs whose start is due; a log leaves its infeed conveyor
    // at its virtual pass-1 start and occupies RQM7 between virtual pass-1
    // completion and pass-2 start.
    void advance(double now) {
      while (!jobs.empty()) {
        const Job j = jobs.top();
        const double start = std::max(j.ready, free_at);
        if (start > now) break;
        jobs.pop();
        const double done = start + mean_service[static_cast<std::size_t>(j.log_id)];
        free_at = done;
        if (j.pass == 1) {
          (routed_rqm4[static_cast<std::size_t>(j.log_id)] ? q4 : q5)--;
          pass1_completions.push(done);
          jobs.push({done + rqm7_transit, order++, j.log_id, 2});
        } else {
          --q7;
        }
      }
      while (!pass1_completions.empty() && pass1_completions.top() <= now) {
        pass1_completions.pop();
        ++q7;
      }
    }
  };
  VirtualCanter canter;
  canter.rqm7_transit = cfg.rqm7_transit_s;
  canter.mean_service.resize(logs.size());
  canter.routed_rqm4.resize(logs.size());
  for (const LogEntity& log : logs)
    canter.mean_service[static_cast<std::size_t>(log.id)] =
        cfg.canter.mean() + cfg.canter_lg_coef * log.lg + cfg.canter_dia_coef * log.dia_moy;

  // --- main sweep over the (already time-ordered) log arrivals -------------
  for (const LogEntity& log : logs) {
    const double now = log.arrival_time;
    serve_until(now);
    canter.advance(now);

    ProductTrace base;
    base.log_id = log.id;
    base.lg = log.lg;
    base.dia_pb = log.dia_pb;
    base.dia_gb = log.dia_gb;
    base.dia_moy = log.dia_moy;
    base.q_trim = q_trim_at(now);
    base.u_trim = u_trim_at(now);
    base.q_rqm4 = canter.q4;
    base.q_rqm5 = canter.q5;
    base.q_rqm7 = canter.q7;
    base.q_rqm = canter.q4 + canter.q5 + canter.q7;
    const RqmRoute route = route_for(log, cfg, canter.q4, canter.q5);
    base.rqm = route;

    canter.routed_rqm4[static_cast<std::size_t>(log.id)] = route == RqmRoute::Rqm4;
    const double transit = route == RqmRoute::Rqm4 ? cfg.rqm4_transit_s : cfg.rqm5_transit_s;
    canter.admit(log.id, route == RqmRoute::Rqm4, now + transit);

    // One prediction per product; runs of equal predicted delays within a
    // category collapse into one queue batch (a feature-driven model gives
    // every piece of a category the same delay, so this is the common path).
    double dts[7];
    for (int k = 0; k < 7; ++k) {
      base.product_index = k + 1;
      base.t_piece =
          k < 2 ? PieceType::CsmkPass1 : (k < 4 ? PieceType::CsmkPass2 : PieceType::Mkv);
      dts[k] = std::max(0.0, predict(base));
    }
    constexpr int cat_begin[4] = {0, 2, 4, 7};
    for (int c = 0; c < 3; ++c) {
      int run = cat_begin[c];
      for (int k = cat_begin[c] + 1; k <= cat_begin[c + 1]; ++k) {
        if (k == cat_begin[c + 1] || dts[k] != dts[run]) {
          pending.push({now + dts[run], batch_seq++, log.id, run + 1, k - run});
          run = k;
        }
      }
    }
  }
  serve_until(std::numeric_limits<double>::infinity());
  result.end_time = services.empty() ? (logs.empty() ? 0.0 : logs.back().arrival_time)
                                     : services.back().done_time;
  result.event_census["log_arrival"] = logs.size();
  result.event_census["trimmer_arrival"] = trimmer_arrival_count;
  result.event_census["trimmer_done"] = trimmer_done_count;

  // FIFO service keeps the records in queue-entry order, which is exactly
  // the predicted-arrival order; rebuild the arrival list from them.
  for (const ServiceRecord& s : services) {
    PredictedArrival pa;
    pa.log_id = s.log_id;
    pa.product_index = s.slot;
    pa.t_piece = s.slot <= 2 ? PieceType::CsmkPass1
                             : (s.slot <= 4 ? PieceType::CsmkPass2 : PieceType::Mkv);
    pa.rqm = canter.routed_rqm4[static_cast<std::size_t>(s.log_id)] ? RqmRoute::Rqm4
                                                                    : RqmRoute::Rqm5;
    pa.log_entry = logs[static_cast<std::size_t>(s.log_id)].arrival_time;
    pa.predicted_arrival = s.enqueue_time;
    result.arrivals.push_back(pa);
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// Reduced run driven by a trained delay model: encode the snapshot under
// the model's scheme, scale, evaluate, de-scale back to seconds. The
// per-column scaling collapses to a precomputed affine map.
inline ReducedResult simulate_reduced(const SimConfig& cfg, const MlpParams& model,
                                      EncodingScheme scheme, const Scaler& scaler) {
  if (encoded_width(scheme) != static_cast<std::size_t>(model.n_inputs))
    throw std::invalid_argument("simulate_reduced: scheme width != model inputs");
  if (scaler.columns.size() != static_cast<std::size_t>(model.n_inputs))
    throw std::invalid_argument("simulate_reduced: scaler width != model inputs");

  const std::size_t w = static_cast<std::size_t>(model.n_inputs);
  std::vector<double> mul(w), add(w);
  for (std::size_t j = 0; j < w; ++j) {
    const Scaler::Column& c = scaler.columns[j];
    if (c.kind == ColumnKind::Discrete) {
      mul[j] = 1.0;
      add[j] = 0.0;
    } else if (c.constant) {
      mul[j] = 0.0;
      add[j] = 0.0;
    } else {
      mul[j] = 2.0 / (c.hi - c.lo);
      add[j] = -1.0 - 2.0 * c.lo / (c.hi - c.lo);
    }
  }
  std::vector<double> features(w), scaled(w), scratch;
  // Pieces of one category share every feature, so memoize per category.
  int memo_log = -1;
  PieceType memo_piece = PieceType::CsmkPass1;
  double memo_dt = 0.0;
  return simulate_reduced_with(cfg, [&, memo_log, memo_piece, memo_dt](
                                        const ProductTrace& tr) mutable {
    if (tr.log_id == memo_log && tr.t_piece == memo_piece) return memo_dt;
    encode_row(tr, scheme, features);
    for (std::size_t j = 0; j < w; ++j) scaled[j] = mul[j] * features[j] + add[j];
    memo_log = tr.log_id;
    memo_piece = tr.t_piece;
    memo_dt = scaler.invert_target(forward(model, scaled, scratch));
    return memo_dt;
  });
}

}  // namespace millreduce

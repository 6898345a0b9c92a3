#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "millreduce/config_file.hpp"
#include "millreduce/csv.hpp"
#include "millreduce/encoding.hpp"
#include "millreduce/model_io.hpp"
#include "millreduce/pruner.hpp"
#include "millreduce/reduced.hpp"
#include "millreduce/sawmill.hpp"
#include "millreduce/stats.hpp"
#include "millreduce/trainer.hpp"

namespace millreduce {

inline constexpr const char* kVersion = "0.1.0";

struct StudyConfig {
  SimConfig sim;
  int n_trials = 30;
  int n_hidden_init = 10;
  std::vector<EncodingScheme> schemes = {EncodingScheme::A1Raw45, EncodingScheme::A2Binary,
                                         EncodingScheme::A3BinaryPlusComplement};
  TrainConfig train;
  PruneConfig prune;
  double learn_fraction = 2.0 / 3.0;
  bool chrono_split = false;
  bool resplit_per_trial = false;  // default: one split shared by all trials
  std::uint64_t split_seed = 0;    // 0: derived from base_seed
  std::uint64_t base_seed = 1000;  // trial seed = base_seed + trial index
  int threads = 0;                 // 0: hardware concurrency
  bool write_svg = true;

  void validate() const {
    sim.validate();
    train.validate();
    prune.validate();
    if (n_trials < 1 || n_hidden_init < 1)
      throw std::invalid_argument("StudyConfig: counts must be positive");
    if (schemes.empty()) throw std::invalid_argument("StudyConfig: no schemes selected");
    if (!(learn_fraction > 0.0 && learn_fraction < 1.0))
      throw std::invalid_argument("StudyConfig: learn fraction must be in (0, 1)");
  }

  std::uint64_t effective_split_seed() const {
    return split_seed != 0 ? split_seed : base_seed ^ 0xd1b54a32d192ed03ULL;
  }
};

struct TrialOutcome {
  int trial = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double learn_mean = 0.0, learn_std = 0.0, val_mean = 0.0, val_std = 0.0;
  double learn_rmse = 0.0, val_rmse = 0.0;
  bool tests_valid = false;
  TestOutcome t_rqm, f_rqm;  // learning residuals split by the RQM route
  EffectiveStructure structure;
  MlpParams params;
  std::vector<double> learn_residuals;
  std::vector<bool> learn_is_rqm4;  // regime of each learning row
  std::vector<double> abs_corr;     // |r(input, residual)| per input column
};

struct SchemeOutcome {
  EncodingScheme scheme = EncodingScheme::A1Raw45;
  std::vector<TrialOutcome> trials;
  SummaryTable summary;
  CorrelationTable correlation;
  double frac_below_30_learn = 0.0;
  double frac_below_30_val = 0.0;
  double mean_abs_val_mean = 0.0;  // scheme ordering metric
  double t_no_reject_fraction = 0.0;
  double f_no_reject_fraction = 0.0;
  int best_trial = -1;  // lowest validation RMSE among finished trials
  Scaler scaler;        // fitted on the shared learning partition
};

struct ReducedDemo {
  bool ran = false;
  EncodingScheme scheme = EncodingScheme::A3BinaryPlusComplement;
  int trial = -1;
  double val_rmse = 0.0;
  double arrival_mae = 0.0;
  double full_wall_s = 0.0;
  double reduced_wall_s = 0.0;
  double speedup = 0.0;
};

struct StudyReport {
  std::string version = kVersion;
  std::string provenance_hash;
  std::uint64_t base_seed = 0;
  std::string config_echo;
  std::vector<SchemeOutcome> schemes;
  ReducedDemo reduced;
  double wall_seconds = 0.0;
};

struct SchemeRank {
  EncodingScheme scheme;
  double mean_abs_val_mean;
  double frac_below_30_learn;
  double t_no_reject_fraction;
};

// Orders schemes by the mean over trials of |validation mean residual|,
// best first; ties break by scheme enum order.
inline std::vector<SchemeRank> compare_schemes(const StudyReport& report) {
  std::vector<SchemeRank> ranks;
  for (const SchemeOutcome& s : report.schemes)
    ranks.push_back({s.scheme, s.mean_abs_val_mean, s.frac_below_30_learn, s.t_no_reject_fraction});
  std::stable_sort(ranks.begin(), ranks.end(), [](const SchemeRank& a, const SchemeRank& b) {
    if (a.mean_abs_val_mean != b.mean_abs_val_mean)
      return a.mean_abs_val_mean < b.mean_abs_val_mean;
    return static_cast<int>(a.scheme) < static_cast<int>(b.scheme);
  });
  return ranks;
}

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string study_config_dump(const StudyConfig& cfg) {
  std::ostringstream os;
  os << sim_config_dump(cfg.sim);
  os << "n_trials = " << cfg.n_trials << '\n'
     << "n_hidden_init = " << cfg.n_hidden_init << '\n'
     << "schemes =";
  for (EncodingScheme s : cfg.schemes) os << ' ' << to_string(s);
  os << '\n'
     << "max_iterations = " << cfg.train.max_iterations << '\n'
     << "initial_damping = " << cfg.train.initial_damping << '\n'
     << "damping_up = " << cfg.train.damping_up << '\n'
     << "damping_down = " << cfg.train.damping_down << '\n'
     << "gradient_tolerance = " << cfg.train.gradient_tolerance << '\n'
     << "step_tolerance = " << cfg.train.step_tolerance << '\n'
     << "robust = " << (cfg.train.robust ? 1 : 0) << '\n'
     << "robust_tuning = " << cfg.train.robust_tuning << '\n'
     << "val_degradation_limit = " << cfg.prune.val_degradation_limit << '\n'
     << "retrain_iterations = " << cfg.prune.retrain_iterations << '\n'
     << "learn_fraction = " << cfg.learn_fraction << '\n'
     << "chrono_split = " << (cfg.chrono_split ? 1 : 0) << '\n'
     << "resplit_per_trial = " << (cfg.resplit_per_trial ? 1 : 0) << '\n'
     << "split_seed = " << cfg.effective_split_seed() << '\n'
     << "base_seed = " << cfg.base_seed << '\n';
  return os.str();
}

// Runs fn(0..n-1) on a small worker pool; every call writes only its own
// index-addressed slot, so the outcome matches sequential execution.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  for (auto& th : pool) th.join();
}

inline bool is_rqm4_code(EncodingScheme scheme, double code) {
  return scheme == EncodingScheme::A1Raw45 ? code == 4.0 : code == 0.0;
}

}  // namespace detail

// One study trial: fresh Nguyen-Widrow weights, robust LM training, weight
// elimination, then residual statistics, per-input residual correlations
// and the RQM-regime tests on the learning set.
inline TrialOutcome run_trial(int trial, std::uint64_t seed, EncodingScheme scheme,
                              const Dataset& learn_raw, const Dataset& learn_scaled,
                              const Dataset& val_scaled, const StudyConfig& cfg) {
  TrialOutcome out;
  out.trial = trial;
  out.seed = seed;
  try {
    MlpParams init =
        nguyen_widrow_init(static_cast<int>(learn_scaled.n_cols), cfg.n_hidden_init, seed);
    MlpParams trained = train(init, learn_scaled, cfg.train).params;
    PruneResult pruned = prune_and_retrain(trained, learn_scaled, val_scaled, cfg.train, cfg.prune);
    out.params = std::move(pruned.params);
    out.structure = effective_structure(out.params);

    out.learn_residuals = residuals(out.params, learn_scaled);
    const std::vector<double> val_res = residuals(out.params, val_scaled);
    out.learn_mean = mean(out.learn_residuals);
    out.learn_std = stddev(out.learn_residuals);
    out.val_mean = mean(val_res);
    out.val_std = stddev(val_res);
    out.learn_rmse = rmse(out.learn_residuals);
    out.val_rmse = rmse(val_res);

    const std::size_t rqm_col = 11;
    out.learn_is_rqm4.resize(learn_raw.n_rows);
    std::vector<double> r4, r5;
    for (std::size_t i = 0; i < learn_raw.n_rows; ++i) {
      const bool is4 = detail::is_rqm4_code(scheme, learn_raw.at(i, rqm_col));
      out.learn_is_rqm4[i] = is4;
      (is4 ? r4 : r5).push_back(out.learn_residuals[i]);
    }
    if (r4.size() >= 2 && r5.size() >= 2) {
      out.t_rqm = t_test_two_sample(r4, r5);
      out.f_rqm = f_test_two_sample(r4, r5);
      out.tests_valid = true;
    }

    std::vector<double> column(learn_raw.n_rows);
    out.abs_corr.resize(learn_raw.n_cols);
    for (std::size_t j = 0; j < learn_raw.n_cols; ++j) {
      for (std::size_t i = 0; i < learn_raw.n_rows; ++i) column[i] = learn_raw.at(i, j);
      out.abs_corr[j] = std::fabs(pearson(column, out.learn_residuals));
    }
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
  return out;
}

inline StudyReport run_study(const StudyConfig& cfg) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();

  StudyReport report;
  report.base_seed = cfg.base_seed;
  report.config_echo = detail::study_config_dump(cfg);
  report.provenance_hash = detail::hex64(detail::fnv1a(report.config_echo));

  const SimResult sim = simulate_full(cfg.sim);

  for (EncodingScheme scheme : cfg.schemes) {
    SchemeOutcome sc;
    sc.scheme = scheme;

    const Dataset encoded = encode(sim.traces, scheme);
    auto [learn_raw, val_raw] =
        cfg.chrono_split ? split_chrono(encoded, cfg.learn_fraction)
                         : split(encoded, cfg.learn_fraction, cfg.effective_split_seed());
    auto [learn_scaled, scaler] = fit_apply_scaler(learn_raw);
    const Dataset val_scaled = apply_scaler(val_raw, scaler);
    sc.scaler = scaler;

    sc.trials.resize(static_cast<std::size_t>(cfg.n_trials));
    detail::parallel_for(cfg.n_trials, cfg.threads, [&](int t) {
      const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(t);
      if (cfg.resplit_per_trial) {
        auto [lr, vr] = cfg.chrono_split ? split_chrono(encoded, cfg.learn_fraction)
                                         : split(encoded, cfg.learn_fraction, seed);
        auto [ls, sca] = fit_apply_scaler(lr);
        const Dataset vs = apply_scaler(vr, sca);
        sc.trials[static_cast<std::size_t>(t)] = run_trial(t, seed, scheme, lr, ls, vs, cfg);
      } else {
        sc.trials[static_cast<std::size_t>(t)] =
            run_trial(t, seed, scheme, learn_raw, learn_scaled, val_scaled, cfg);
      }
    });

    // Aggregate over the trials that finished.
    std::vector<double> learn_means, learn_stds, val_means, val_stds;
    std::vector<std::vector<double>> corr_rows;
    std::size_t t_no_reject = 0, f_no_reject = 0, tested = 0;
    double best_val = 0.0;
    for (const TrialOutcome& t : sc.trials) {
      if (!t.ok) continue;
      learn_means.push_back(t.learn_mean);
      learn_stds.push_back(t.learn_std);
      val_means.push_back(t.val_mean);
      val_stds.push_back(t.val_std);
      corr_rows.push_back(t.abs_corr);
      if (t.tests_valid) {
        ++tested;
        t_no_reject += !t.t_rqm.reject_h0;
        f_no_reject += !t.f_rqm.reject_h0;
      }
      if (sc.best_trial < 0 || t.val_rmse < best_val) {
        best_val = t.val_rmse;
        sc.best_trial = t.trial;
      }
    }
    if (!learn_means.empty()) {
      sc.summary.n_trials = learn_means.size();
      sc.summary.learn_mean = aggregate_stat(learn_means);
      sc.summary.learn_std = aggregate_stat(learn_stds);
      sc.summary.val_mean = aggregate_stat(val_means);
      sc.summary.val_std = aggregate_stat(val_stds);

      sc.correlation.inputs = encoded_column_names(scheme);
      std::vector<double> per_trial(corr_rows.size());
      for (std::size_t j = 0; j < sc.correlation.inputs.size(); ++j) {
        for (std::size_t t = 0; t < corr_rows.size(); ++t) per_trial[t] = corr_rows[t][j];
        sc.correlation.per_input.push_back(aggregate_stat(per_trial));
      }

      sc.frac_below_30_learn = frac_mean_below(learn_means, 30.0);
      sc.frac_below_30_val = frac_mean_below(val_means, 30.0);
      double s = 0.0;
      for (double m : val_means) s += std::fabs(m);
      sc.mean_abs_val_mean = s / static_cast<double>(val_means.size());
      if (tested > 0) {
        sc.t_no_reject_fraction = static_cast<double>(t_no_reject) / static_cast<double>(tested);
        sc.f_no_reject_fraction = static_cast<double>(f_no_reject) / static_cast<double>(tested);
      }
    }
    report.schemes.push_back(std::move(sc));
  }

  // Reduced-model demonstration with the best model of the preferred scheme.
  const SchemeOutcome* demo_scheme = nullptr;
  for (const SchemeOutcome& s : report.schemes)
    if (s.scheme == EncodingScheme::A3BinaryPlusComplement && s.best_trial >= 0) demo_scheme = &s;
  if (!demo_scheme)
    for (const SchemeOutcome& s : report.schemes)
      if (s.best_trial >= 0) demo_scheme = &s;
  if (demo_scheme) {
    const TrialOutcome& best =
        *std::find_if(demo_scheme->trials.begin(), demo_scheme->trials.end(),
                      [&](const TrialOutcome& t) { return t.trial == demo_scheme->best_trial; });
    ReducedDemo demo;
    demo.scheme = demo_scheme->scheme;
    demo.trial = best.trial;
    demo.val_rmse = best.val_rmse;

    const SimResult full = simulate_full(cfg.sim);
    const ReducedResult red =
        simulate_reduced(cfg.sim, best.params, demo_scheme->scheme, demo_scheme->scaler);

    std::map<std::pair<int, int>, double> actual;
    for (const ProductTrace& t : full.traces) actual[{t.log_id, t.product_index}] = t.delta_t;
    double abs_err = 0.0;
    std::size_t n = 0;
    for (const PredictedArrival& a : red.arrivals) {
      auto it = actual.find({a.log_id, a.product_index});
      if (it == actual.end()) continue;
      abs_err += std::fabs(a.predicted_arrival - (a.log_entry + it->second));
      ++n;
    }
    demo.arrival_mae = n > 0 ? abs_err / static_cast<double>(n) : 0.0;
    demo.full_wall_s = full.wall_seconds;
    demo.reduced_wall_s = red.wall_seconds;
    demo.speedup = red.wall_seconds > 0 ? full.wall_seconds / red.wall_seconds : 0.0;
    demo.ran = true;
    report.reduced = demo;
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

// ---------------------------------------------------------------------------
// Artifact writing.

namespace detail {

inline std::string fmt2(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline void write_summary_csv(std::ostream& os, const SummaryTable& t) {
  os << "row,learn_mean,learn_std,val_mean,val_std\n";
  auto row = [&](const char* name, auto get) {
    os << name << ',' << fmt_full(get(t.learn_mean)) << ',' << fmt_full(get(t.learn_std)) << ','
       << fmt_full(get(t.val_mean)) << ',' << fmt_full(get(t.val_std)) << '\n';
  };
  row("mean", [](const StatAggregate& a) { return a.mean; });
  row("std", [](const StatAggregate& a) { return a.std; });
  row("min", [](const StatAggregate& a) { return a.min; });
  row("abs_min", [](const StatAggregate& a) { return a.abs_min; });
  row("max", [](const StatAggregate& a) { return a.max; });
}

inline void write_correlation_csv(std::ostream& os, const CorrelationTable& t) {
  os << "input,mean,std,min,max\n";
  for (std::size_t i = 0; i < t.inputs.size(); ++i) {
    const StatAggregate& a = t.per_input[i];
    os << t.inputs[i] << ',' << fmt_full(a.mean) << ',' << fmt_full(a.std) << ','
       << fmt_full(a.min) << ',' << fmt_full(a.max) << '\n';
  }
}

inline void write_tests_csv(std::ostream& os, const SchemeOutcome& sc) {
  os << "trial,t_stat,t_df,t_p,t_reject,f_stat,f_df1,f_df2,f_p,f_reject\n";
  for (const TrialOutcome& t : sc.trials) {
    if (!t.ok || !t.tests_valid) continue;
    os << t.trial << ',' << fmt_full(t.t_rqm.statistic) << ',' << fmt_full(t.t_rqm.df1) << ','
       << fmt_full(t.t_rqm.p_value) << ',' << (t.t_rqm.reject_h0 ? 1 : 0) << ','
       << fmt_full(t.f_rqm.statistic) << ',' << fmt_full(t.f_rqm.df1) << ','
       << fmt_full(t.f_rqm.df2) << ',' << fmt_full(t.f_rqm.p_value) << ','
       << (t.f_rqm.reject_h0 ? 1 : 0) << '\n';
  }
}

inline void write_trials_csv(std::ostream& os, const SchemeOutcome& sc) {
  os << "trial,seed,ok,learn_mean,learn_std,val_mean,val_std,learn_rmse,val_rmse,"
        "active_inputs,active_hidden,active_weights,error\n";
  for (const TrialOutcome& t : sc.trials) {
    os << t.trial << ',' << t.seed << ',' << (t.ok ? 1 : 0) << ',' << fmt_full(t.learn_mean)
       << ',' << fmt_full(t.learn_std) << ',' << fmt_full(t.val_mean) << ','
       << fmt_full(t.val_std) << ',' << fmt_full(t.learn_rmse) << ',' << fmt_full(t.val_rmse)
       << ',' << t.structure.active_inputs << ',' << t.structure.active_hidden << ','
       << t.structure.active_weights << ',' << t.error << '\n';
  }
}

// Minimal scatter of learning residuals against the RQM route (Fig-4 style):
// two point columns with deterministic horizontal jitter.
inline void write_residual_svg(std::ostream& os, const SchemeOutcome& sc) {
  const TrialOutcome* best = nullptr;
  for (const TrialOutcome& t : sc.trials)
    if (t.trial == sc.best_trial) best = &t;
  if (!best || best->learn_residuals.empty()) return;
  const auto& res = best->learn_residuals;
  double lo = res[0], hi = res[0];
  for (double v : res) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi == lo) hi = lo + 1.0;
  const double w = 640, h = 420, ml = 70, mr = 20, mt = 20, mb = 40;
  auto ypix = [&](double v) { return mt + (hi - v) / (hi - lo) * (h - mt - mb); };
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n"
     << "<rect width='100%' height='100%' fill='white'/>\n"
     << "<line x1='" << ml << "' y1='" << fmt2(ypix(0)) << "' x2='" << w - mr << "' y2='"
     << fmt2(ypix(0)) << "' stroke='#999'/>\n";
  const double x4 = ml + (w - ml - mr) * 0.3, x5 = ml + (w - ml - mr) * 0.7;
  for (std::size_t i = 0; i < res.size(); ++i) {
    const double cx = (best->learn_is_rqm4[i] ? x4 : x5) +
                      static_cast<double>((i * 2654435761u) % 61) - 30.0;
    os << "<circle cx='" << fmt2(cx) << "' cy='" << fmt2(ypix(res[i]))
       << "' r='1.2' fill='#1f77b4' fill-opacity='0.35'/>\n";
  }
  os << "<text x='" << x4 << "' y='" << h - 12 << "' text-anchor='middle'>RQM4</text>\n"
     << "<text x='" << x5 << "' y='" << h - 12 << "' text-anchor='middle'>RQM5</text>\n"
     << "<text x='12' y='" << fmt2(ypix(hi) + 10) << "'>" << fmt2(hi) << "</text>\n"
     << "<text x='12' y='" << fmt2(ypix(lo)) << "'>" << fmt2(lo) << "</text>\n"
     << "<text x='12' y='14'>residual (s), trial " << best->trial << "</text>\n"
     << "</svg>\n";
}

inline void append_summary_text(std::ostream& os, const SchemeOutcome& sc) {
  char buf[240];
  os << "Scheme " << to_string(sc.scheme) << " residual summary over "
     << sc.summary.n_trials << " trials (seconds)\n";
  os << "            learning residual          validation residual\n";
  os << "            Mean         StD           Mean         StD\n";
  auto line = [&](const char* name, auto get) {
    std::snprintf(buf, sizeof buf, "  %-8s %10.2f  %10.2f    %10.2f  %10.2f\n", name,
                  get(sc.summary.learn_mean), get(sc.summary.learn_std),
                  get(sc.summary.val_mean), get(sc.summary.val_std));
    os << buf;
  };
  line("Mean", [](const StatAggregate& a) { return a.mean; });
  line("StD", [](const StatAggregate& a) { return a.std; });
  line("Min", [](const StatAggregate& a) { return a.min; });
  line("(abs)", [](const StatAggregate& a) { return a.abs_min; });
  line("Max", [](const StatAggregate& a) { return a.max; });
  os << '\n';

  os << "Correlation |r| between inputs and learning residuals\n";
  os << "  input        Mean      StD       Min       Max\n";
  for (std::size_t i = 0; i < sc.correlation.inputs.size(); ++i) {
    const StatAggregate& a = sc.correlation.per_input[i];
    std::snprintf(buf, sizeof buf, "  %-10s %8.4f  %8.4f  %8.4f  %8.4f\n",
                  sc.correlation.inputs[i].c_str(), a.mean, a.std, a.min, a.max);
    os << buf;
  }
  os << '\n';
  std::snprintf(buf, sizeof buf,
                "  |mean| < 30 s: learning %.2f%%, validation %.2f%%\n"
                "  RQM-split tests (99%% confidence): t-test fails to reject in %.2f%%,"
                " F-test fails to reject in %.2f%%\n\n",
                100.0 * sc.frac_below_30_learn, 100.0 * sc.frac_below_30_val,
                100.0 * sc.t_no_reject_fraction, 100.0 * sc.f_no_reject_fraction);
  os << buf;
}

}  // namespace detail

// Writes every study artifact below out_dir: per-scheme CSV tables, the
// per-trial model files, the plain-text report and the optional residual
// scatter. Deterministic byte-for-byte for a fixed config.
inline void write_study_outputs(const StudyReport& report, const StudyConfig& cfg,
                                const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  std::ofstream cfg_out(out_dir + "/study_config.txt");
  if (!cfg_out) throw std::runtime_error("write_study_outputs: cannot write to " + out_dir);
  cfg_out << report.config_echo;

  for (const SchemeOutcome& sc : report.schemes) {
    const std::string dir = out_dir + "/scheme_" + to_string(sc.scheme);
    fs::create_directories(dir + "/models");
    {
      std::ofstream os(dir + "/summary.csv");
      detail::write_summary_csv(os, sc.summary);
    }
    {
      std::ofstream os(dir + "/correlation.csv");
      detail::write_correlation_csv(os, sc.correlation);
    }
    {
      std::ofstream os(dir + "/tests.csv");
      detail::write_tests_csv(os, sc);
    }
    {
      std::ofstream os(dir + "/trials.csv");
      detail::write_trials_csv(os, sc);
    }
    if (cfg.write_svg) {
      std::ofstream os(dir + "/residual_vs_rqm.svg");
      detail::write_residual_svg(os, sc);
    }
    for (const TrialOutcome& t : sc.trials) {
      if (!t.ok) continue;
      SavedModel m;
      m.params = t.params;
      m.input_column_names = encoded_column_names(sc.scheme);
      m.scaler = sc.scaler;
      char name[64];
      std::snprintf(name, sizeof name, "/models/trial_%02d.json", t.trial);
      save_model(m, dir + name);
    }
  }

  std::ofstream os(out_dir + "/report.txt");
  os << "Sawmill simulation reduction study (v" << report.version << ")\n";
  os << "provenance " << report.provenance_hash << ", base seed " << report.base_seed << "\n\n";
  for (const SchemeOutcome& sc : report.schemes) detail::append_summary_text(os, sc);

  os << "Scheme ranking by mean |validation mean residual| (best first):\n";
  for (const SchemeRank& r : compare_schemes(report)) {
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "  %s: mean|mean| %.2f s, |mean|<30s in %.2f%% (learning), "
                  "t-test no-reject %.2f%%\n",
                  to_string(r.scheme), r.mean_abs_val_mean, 100.0 * r.frac_below_30_learn,
                  100.0 * r.t_no_reject_fraction);
    os << buf;
  }
  os << '\n';

  if (report.reduced.ran) {
    char buf[240];
    std::snprintf(buf, sizeof buf,
                  "Reduced model (scheme %s, trial %d): arrival MAE %.2f s vs validation "
                  "RMSE %.2f s; wall %.4f s full vs %.4f s reduced (speedup %.2fx)\n",
                  to_string(report.reduced.scheme), report.reduced.trial,
                  report.reduced.arrival_mae, report.reduced.val_rmse, report.reduced.full_wall_s,
                  report.reduced.reduced_wall_s, report.reduced.speedup);
    os << buf;
  }
}

}  // namespace millreduce

// millreduce: sawmill line simulation, delay-model training and the
// discrete-input encoding study, from one command-line tool.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "millreduce/config_file.hpp"
#include "millreduce/csv.hpp"
#include "millreduce/encoding.hpp"
#include "millreduce/model_io.hpp"
#include "millreduce/pruner.hpp"
#include "millreduce/reduced.hpp"
#include "millreduce/reduction.hpp"
#include "millreduce/sawmill.hpp"
#include "millreduce/stats.hpp"
#include "millreduce/study.hpp"
#include "millreduce/trainer.hpp"

namespace {

using namespace millreduce;

SimConfig load_sim_config(const std::string& path) {
  if (path.empty()) return SimConfig{};
  auto kv = KeyValueConfig::parse_file(path);
  SimConfig cfg = sim_config_from(kv);
  kv.reject_unknown_keys();
  return cfg;
}

StudyConfig load_study_config(const std::string& path) {
  StudyConfig cfg;
  if (path.empty()) return cfg;
  auto kv = KeyValueConfig::parse_file(path);
  cfg.sim = sim_config_from(kv);
  cfg.n_trials = static_cast<int>(kv.integer("n_trials", cfg.n_trials));
  cfg.n_hidden_init = static_cast<int>(kv.integer("n_hidden_init", cfg.n_hidden_init));
  const std::string schemes = kv.text("schemes", "a1 a2 a3");
  cfg.schemes.clear();
  std::istringstream ss(schemes);
  for (std::string tok; ss >> tok;) cfg.schemes.push_back(scheme_from_string(tok));
  cfg.train.max_iterations = static_cast<int>(kv.integer("max_iterations", cfg.train.max_iterations));
  cfg.train.initial_damping = kv.number("initial_damping", cfg.train.initial_damping);
  cfg.train.damping_up = kv.number("damping_up", cfg.train.damping_up);
  cfg.train.damping_down = kv.number("damping_down", cfg.train.damping_down);
  cfg.train.gradient_tolerance = kv.number("gradient_tolerance", cfg.train.gradient_tolerance);
  cfg.train.step_tolerance = kv.number("step_tolerance", cfg.train.step_tolerance);
  cfg.train.robust = kv.integer("robust", cfg.train.robust ? 1 : 0) != 0;
  cfg.train.robust_tuning = kv.number("robust_tuning", cfg.train.robust_tuning);
  cfg.prune.val_degradation_limit =
      kv.number("val_degradation_limit", cfg.prune.val_degradation_limit);
  cfg.prune.retrain_iterations =
      static_cast<int>(kv.integer("retrain_iterations", cfg.prune.retrain_iterations));
  cfg.prune.max_removals = static_cast<int>(kv.integer("max_removals", cfg.prune.max_removals));
  cfg.learn_fraction = kv.number("learn_fraction", cfg.learn_fraction);
  cfg.chrono_split = kv.integer("chrono_split", cfg.chrono_split ? 1 : 0) != 0;
  cfg.resplit_per_trial = kv.integer("resplit_per_trial", cfg.resplit_per_trial ? 1 : 0) != 0;
  cfg.split_seed = static_cast<std::uint64_t>(kv.integer("split_seed", 0));
  cfg.base_seed = static_cast<std::uint64_t>(kv.integer("base_seed", static_cast<long>(cfg.base_seed)));
  cfg.threads = static_cast<int>(kv.integer("threads", cfg.threads));
  kv.reject_unknown_keys();
  return cfg;
}

std::vector<ProductTrace> traces_from(const std::string& traces_path, const SimConfig& sim) {
  if (!traces_path.empty()) return read_traces_csv(traces_path);
  return simulate_full(sim).traces;
}

struct Pipeline {
  Dataset learn_raw, learn, val;
  Scaler scaler;
};

Pipeline build_pipeline(std::span<const ProductTrace> traces, EncodingScheme scheme,
                        double fraction, bool chrono, std::uint64_t split_seed) {
  Pipeline p;
  const Dataset encoded = encode(traces, scheme);
  auto [lr, vr] = chrono ? split_chrono(encoded, fraction) : split(encoded, fraction, split_seed);
  p.learn_raw = std::move(lr);
  auto [ls, sc] = fit_apply_scaler(p.learn_raw);
  p.learn = std::move(ls);
  p.scaler = sc;
  p.val = apply_scaler(vr, sc);
  return p;
}

int cmd_simulate(const std::string& config_path, int logs_override, long seed_override,
                 const std::string& out_dir) {
  SimConfig cfg = load_sim_config(config_path);
  if (logs_override > 0) cfg.n_logs = logs_override;
  if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
  const SimResult result = simulate_full(cfg);

  std::filesystem::create_directories(out_dir);
  write_traces_csv(out_dir + "/traces.csv", result.traces);
  {
    std::ofstream os(out_dir + "/utilizations.csv");
    os << "station,utilization\n";
    for (const auto& [name, u] : station_utilizations(result))
      os << name << ',' << fmt_full(u) << '\n';
  }
  std::printf("simulated %d logs -> %zu traces in %.3f s (horizon %.0f s)\n", cfg.n_logs,
              result.traces.size(), result.wall_seconds, result.end_time);
  for (const auto& [name, u] : station_utilizations(result))
    std::printf("  %-8s utilization %.3f\n", name.c_str(), u);
  std::printf("wrote %s/traces.csv\n", out_dir.c_str());
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& traces_path,
              const std::string& scheme_name, long seed, const std::string& split_mode,
              double fraction, const std::string& out_dir) {
  const SimConfig sim = load_sim_config(config_path);
  const auto traces = traces_from(traces_path, sim);
  const EncodingScheme scheme = scheme_from_string(scheme_name);
  const auto su = static_cast<std::uint64_t>(seed);
  Pipeline p = build_pipeline(traces, scheme, fraction, split_mode == "chrono",
                              su ^ 0xd1b54a32d192ed03ULL);

  MlpParams init = nguyen_widrow_init(static_cast<int>(p.learn.n_cols), 10, su);
  TrainConfig tcfg;
  TrainResult result = train(init, p.learn, tcfg);

  std::filesystem::create_directories(out_dir);
  SavedModel m{result.params, encoded_column_names(scheme), p.scaler};
  save_model(m, out_dir + "/model.json");
  std::ofstream(out_dir + "/history.csv") << result.history.to_csv();

  const auto lr = residuals(result.params, p.learn);
  const auto vr = residuals(result.params, p.val);
  std::printf("trained scheme %s on %zu rows: learn RMSE %.3f s, val RMSE %.3f s (%s)\n",
              to_string(scheme), p.learn.n_rows, rmse(lr), rmse(vr),
              result.history.stop_reason.c_str());
  std::printf("wrote %s/model.json\n", out_dir.c_str());
  return 0;
}

int cmd_prune(const std::string& config_path, const std::string& traces_path,
              const std::string& model_path, const std::string& scheme_name, long seed,
              const std::string& split_mode, double fraction, const std::string& out_dir) {
  const SimConfig sim = load_sim_config(config_path);
  const auto traces = traces_from(traces_path, sim);
  const EncodingScheme scheme = scheme_from_string(scheme_name);
  const auto su = static_cast<std::uint64_t>(seed);
  Pipeline p = build_pipeline(traces, scheme, fraction, split_mode == "chrono",
                              su ^ 0xd1b54a32d192ed03ULL);

  SavedModel m = load_model(model_path);
  TrainConfig tcfg;
  PruneConfig pcfg;
  PruneResult result = prune_and_retrain(m.params, p.learn, p.val, tcfg, pcfg);

  std::filesystem::create_directories(out_dir);
  SavedModel pruned{result.params, m.input_column_names, p.scaler};
  save_model(pruned, out_dir + "/model_pruned.json");
  std::ofstream(out_dir + "/removal_log.csv") << result.removal_log_csv();

  const auto s = effective_structure(result.params);
  std::printf("pruned to %d weights (%d inputs, %d hidden) in %zu removals; val RMSE %.3f s\n",
              s.active_weights, s.active_inputs, s.active_hidden, result.removal_log.size(),
              rmse(residuals(result.params, p.val)));
  std::printf("wrote %s/model_pruned.json\n", out_dir.c_str());
  return 0;
}

int cmd_study(const std::string& config_path, int trials_override, long seed_override,
              const std::string& schemes_csv, const std::string& split_mode, int threads,
              const std::string& out_dir) {
  StudyConfig cfg = load_study_config(config_path);
  if (trials_override > 0) cfg.n_trials = trials_override;
  if (seed_override >= 0) cfg.base_seed = static_cast<std::uint64_t>(seed_override);
  if (!schemes_csv.empty()) {
    cfg.schemes.clear();
    std::istringstream ss(schemes_csv);
    for (std::string tok; std::getline(ss, tok, ',');) cfg.schemes.push_back(scheme_from_string(tok));
  }
  if (split_mode == "chrono") cfg.chrono_split = true;
  if (threads > 0) cfg.threads = threads;

  const StudyReport report = run_study(cfg);
  write_study_outputs(report, cfg, out_dir);

  std::printf("study finished in %.1f s; outputs in %s\n", report.wall_seconds, out_dir.c_str());
  for (const SchemeRank& r : compare_schemes(report))
    std::printf("  %s: mean|val mean| %.2f s, |mean|<30s %.1f%%, t no-reject %.1f%%\n",
                to_string(r.scheme), r.mean_abs_val_mean, 100.0 * r.frac_below_30_learn,
                100.0 * r.t_no_reject_fraction);
  if (report.reduced.ran)
    std::printf("  reduced model: MAE %.2f s (val RMSE %.2f s), speedup %.2fx\n",
                report.reduced.arrival_mae, report.reduced.val_rmse, report.reduced.speedup);
  return 0;
}

int cmd_reduce(const std::string& config_path, const std::string& model_path,
               const std::string& out_dir) {
  const SimConfig sim = load_sim_config(config_path);
  SavedModel m = load_model(model_path);
  // The scheme is recoverable from the model shape: 13 inputs means A3, and
  // for 12 inputs the scaler's recorded RQM column range separates the raw
  // 4/5 coding from the binary one.
  EncodingScheme scheme = EncodingScheme::A2Binary;
  if (m.params.n_inputs == 13)
    scheme = EncodingScheme::A3BinaryPlusComplement;
  else if (m.scaler.columns.size() == 12 && m.scaler.columns[11].hi >= 4.0)
    scheme = EncodingScheme::A1Raw45;

  const SimResult full = simulate_full(sim);
  const ReducedResult red = simulate_reduced(sim, m.params, scheme, m.scaler);

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

  std::filesystem::create_directories(out_dir);
  std::ofstream os(out_dir + "/predicted_arrivals.csv");
  os << "log_id,product_index,t_piece,rqm,log_entry,predicted_arrival\n";
  for (const PredictedArrival& a : red.arrivals)
    os << a.log_id << ',' << a.product_index << ',' << to_string(a.t_piece) << ','
       << to_string(a.rqm) << ',' << fmt_full(a.log_entry) << ','
       << fmt_full(a.predicted_arrival) << '\n';

  std::printf("reduced run: %zu predicted arrivals, MAE %.2f s, wall %.4f s vs full %.4f s "
              "(speedup %.2fx)\n",
              red.arrivals.size(), n ? abs_err / static_cast<double>(n) : 0.0, red.wall_seconds,
              full.wall_seconds,
              red.wall_seconds > 0 ? full.wall_seconds / red.wall_seconds : 0.0);
  std::printf("wrote %s/predicted_arrivals.csv\n", out_dir.c_str());
  return 0;
}

int cmd_report(const std::string& config_path, const std::string& routings_path, int periods,
               long seed_override, double saturation, double structural_fraction) {
  SimConfig cfg = load_sim_config(config_path);
  if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);

  UtilizationHistory history;
  history.stations = {"canter", "kockums", "mkv", "trimmer"};
  for (int p = 0; p < periods; ++p) {
    SimConfig period_cfg = cfg;
    period_cfg.seed = cfg.seed + static_cast<std::uint64_t>(p);
    const auto util = station_utilizations(simulate_full(period_cfg));
    std::vector<double> row;
    for (const auto& s : history.stations) row.push_back(std::min(1.0, util.at(s)));
    history.periods.push_back(row);
  }

  const BottleneckClasses classes = classify_bottlenecks(history, saturation, structural_fraction);
  std::printf("utilization history over %d simulated periods:\n", periods);
  for (std::size_t s = 0; s < history.stations.size(); ++s) {
    std::printf("  %-8s", history.stations[s].c_str());
    for (const auto& period : history.periods) std::printf(" %.3f", period[s]);
    std::printf("\n");
  }
  auto print_set = [](const char* label, const std::set<std::string>& set) {
    std::printf("%s:", label);
    for (const auto& s : set) std::printf(" %s", s.c_str());
    if (set.empty()) std::printf(" (none)");
    std::printf("\n");
  };
  print_set("structural bottlenecks", classes.structural);
  print_set("conjunctural bottlenecks", classes.conjunctural);

  if (!routings_path.empty()) {
    const auto routings = read_routings_csv(routings_path);
    std::set<std::string> bottlenecks = classes.structural;
    bottlenecks.insert(classes.conjunctural.begin(), classes.conjunctural.end());
    print_set("synchronization stations", synchronization_stations(routings, bottlenecks));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sawmill simulation reduction toolkit"};
  app.require_subcommand(1);

  std::string config_path, traces_path, model_path, routings_path;
  std::string out_dir = "out";
  std::string scheme = "a3";
  std::string schemes_csv;
  std::string split_mode = "random";
  double fraction = 2.0 / 3.0;
  double saturation = 0.9, structural_fraction = 0.5;
  int logs = 0, trials = 0, threads = 0, periods = 5;
  long seed = -1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key = value config file");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "override the config seed");
  };

  auto* sim = app.add_subcommand("simulate", "run the full line and export traces");
  add_common(sim);
  sim->add_option("--logs", logs, "override the number of logs");

  auto* tr = app.add_subcommand("train", "train a delay model on simulated traces");
  add_common(tr);
  tr->add_option("--traces", traces_path, "read traces from CSV instead of simulating");
  tr->add_option("--scheme", scheme, "encoding scheme: a1|a2|a3");
  tr->add_option("--split", split_mode, "random|chrono")->check(CLI::IsMember({"random", "chrono"}));
  tr->add_option("--fraction", fraction, "learning fraction");

  auto* pr = app.add_subcommand("prune", "weight-eliminate a trained model");
  add_common(pr);
  pr->add_option("--traces", traces_path, "read traces from CSV instead of simulating");
  pr->add_option("--model", model_path, "trained model JSON")->required();
  pr->add_option("--scheme", scheme, "encoding scheme: a1|a2|a3");
  pr->add_option("--split", split_mode, "random|chrono")->check(CLI::IsMember({"random", "chrono"}));
  pr->add_option("--fraction", fraction, "learning fraction");

  auto* st = app.add_subcommand("study", "run the full encoding study");
  add_common(st);
  st->add_option("--trials", trials, "trials per scheme");
  st->add_option("--scheme", schemes_csv, "comma list of schemes (default a1,a2,a3)");
  st->add_option("--split", split_mode, "random|chrono")->check(CLI::IsMember({"random", "chrono"}));
  st->add_option("--threads", threads, "worker threads (0 = hardware)");

  auto* rd = app.add_subcommand("reduce", "run the reduced model against the full one");
  add_common(rd);
  rd->add_option("--model", model_path, "trained model JSON")->required();

  auto* rp = app.add_subcommand("report", "bottleneck classification and synchronization stations");
  add_common(rp);
  rp->add_option("--routings", routings_path, "routings CSV (mo_id,station_1,...)");
  rp->add_option("--periods", periods, "simulated history periods");
  rp->add_option("--saturation", saturation, "saturation threshold");
  rp->add_option("--structural-fraction", structural_fraction, "structural period fraction");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(config_path, logs, seed, out_dir);
    if (tr->parsed()) return cmd_train(config_path, traces_path, scheme, seed < 0 ? 1 : seed,
                                       split_mode, fraction, out_dir);
    if (pr->parsed()) return cmd_prune(config_path, traces_path, model_path, scheme,
                                       seed < 0 ? 1 : seed, split_mode, fraction, out_dir);
    if (st->parsed()) return cmd_study(config_path, trials, seed, schemes_csv, split_mode,
                                       threads, out_dir);
    if (rd->parsed()) return cmd_reduce(config_path, model_path, out_dir);
    if (rp->parsed()) return cmd_report(config_path, routings_path, periods, seed, saturation,
                                        structural_fraction);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

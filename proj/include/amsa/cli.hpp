#pragma once

/*
 * `train` command: configuration parsing, multi-run orchestration and CSV
 * output. Flags override config-file values, which override the task
 * defaults.
 */

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "amsa/csv.hpp"
#include "amsa/experiments.hpp"
#include "amsa/msa.hpp"
#include "amsa/parallel.hpp"
#include "amsa/rng.hpp"

namespace amsa::cli {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class StrategyName { shallow, deep, a1, a2, a3, theoretical };

struct CliConfig {
  Task experiment = Task::sine;
  StrategyName strategy = StrategyName::shallow;
  std::size_t runs = 20;
  std::size_t iters = 800;
  std::size_t samples = 20;
  std::uint64_t seed = 42;
  double rho = 5.0;
  double final_time = 5.0;
  std::size_t width = 3;
  Bounds bounds{-1.0, 1.0};
  IntegratorKind integrator = IntegratorKind::explicit_euler;
  double tau = 1e-8;
  std::size_t threads = 1;
  std::filesystem::path out_dir = "results";
  std::optional<double> delta;
  std::optional<double> constant_c;
  std::size_t ascent_evals = AscentOptions{}.max_evals;
  std::size_t refine = MultistartOptions{}.n_refine;
  bool refine_incumbent = MultistartOptions{}.refine_incumbent;
  bool timing = false;
};

/// Task-dependent defaults for width, bounds and sample count.
inline CliConfig defaults_for(Task task) {
  CliConfig cfg;
  cfg.experiment = task;
  switch (task) {
    case Task::sine:
      break;
    case Task::step:
      cfg.samples = 800;
      break;
    case Task::classif:
      cfg.samples = 800;
      cfg.width = 6;
      cfg.bounds = {-2.0, 2.0};
      break;
  }
  return cfg;
}

inline const std::map<std::string, Task>& task_names() {
  static const std::map<std::string, Task> m{{"sine", Task::sine}, {"step", Task::step}, {"classif", Task::classif}};
  return m;
}

inline const std::map<std::string, StrategyName>& strategy_names() {
  static const std::map<std::string, StrategyName> m{
      {"shallow", StrategyName::shallow}, {"deep", StrategyName::deep}, {"a1", StrategyName::a1},
      {"a2", StrategyName::a2},           {"a3", StrategyName::a3},     {"theoretical", StrategyName::theoretical}};
  return m;
}

inline std::string strategy_label(StrategyName s) {
  for (const auto& [name, value] : strategy_names()) {
    if (value == s) return name;
  }
  return "?";
}

/// Parses the arguments following the program name, e.g.
/// {"train", "--experiment", "sine", "--strategy", "a2"}.
inline CliConfig parse_config(const std::vector<std::string>& args) {
  CLI::App app{"Adaptive successive-approximation training of ODE networks", "amsa"};
  app.set_config("--config", "", "flat key=value file with the same keys as the flags");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1, 1);
  CLI::App* train = app.add_subcommand("train", "run a multi-run training experiment");
  train->fallthrough();

  std::string experiment = "sine";
  std::string strategy = "shallow";
  std::string integrator = "euler";
  std::optional<std::size_t> runs;
  std::optional<std::size_t> iters;
  std::optional<std::size_t> samples;
  std::optional<std::size_t> width;
  std::optional<std::size_t> threads;
  std::optional<std::size_t> ascent_evals;
  std::optional<std::size_t> refine;
  std::optional<std::uint64_t> seed;
  std::optional<double> rho;
  std::optional<double> final_time;
  std::optional<double> tau;
  std::optional<double> delta;
  std::optional<double> constant_c;
  std::optional<std::vector<double>> bounds;
  std::optional<std::string> out_dir;
  bool timing = false;
  std::optional<bool> refine_incumbent;

  app.add_option("--experiment", experiment, "sine | step | classif")
      ->check(CLI::IsMember({"sine", "step", "classif"}));
  app.add_option("--strategy", strategy, "shallow | deep | a1 | a2 | a3 | theoretical")
      ->check(CLI::IsMember({"shallow", "deep", "a1", "a2", "a3", "theoretical"}));
  app.add_option("--runs", runs, "independent training runs")->check(CLI::PositiveNumber);
  app.add_option("--iters", iters, "maximum iterations per run (k_max)");
  app.add_option("--samples", samples, "training samples N")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "master seed");
  app.add_option("--rho", rho, "augmentation weight")->check(CLI::PositiveNumber);
  app.add_option("--final-time", final_time, "horizon T")->check(CLI::PositiveNumber);
  app.add_option("--width", width, "neurons per layer d")->check(CLI::PositiveNumber);
  app.add_option("--bounds", bounds, "control box: lo hi")->expected(2);
  app.add_option("--integrator", integrator, "euler | heun")->check(CLI::IsMember({"euler", "heun"}));
  app.add_option("--tau", tau, "stopping tolerance on the loss change")->check(CLI::PositiveNumber);
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", out_dir, "output directory");
  app.add_option("--delta", delta, "delta of the theoretical schedule")->check(CLI::PositiveNumber);
  app.add_option("--C", constant_c, "constant C of the theoretical schedule")->check(CLI::PositiveNumber);
  app.add_option("--ascent-evals", ascent_evals, "objective evaluations per ascent")->check(CLI::PositiveNumber);
  app.add_option("--refine", refine, "screened multistart candidates refined per node");
  app.add_option("--refine-incumbent", refine_incumbent, "also refine the incumbent layer (true|false)");
  app.add_flag("--timing", timing, "record wall-clock milliseconds per iteration");

  std::vector<const char*> argv{"amsa"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.get_name() + ": " + e.what());
  }

  CliConfig cfg = defaults_for(task_names().at(experiment));
  cfg.strategy = strategy_names().at(strategy);
  cfg.integrator = integrator == "heun" ? IntegratorKind::heun2 : IntegratorKind::explicit_euler;
  if (runs) cfg.runs = *runs;
  if (iters) cfg.iters = *iters;
  if (samples) cfg.samples = *samples;
  if (seed) cfg.seed = *seed;
  if (rho) cfg.rho = *rho;
  if (final_time) cfg.final_time = *final_time;
  if (width) cfg.width = *width;
  if (tau) cfg.tau = *tau;
  if (threads) cfg.threads = *threads;
  if (out_dir) cfg.out_dir = *out_dir;
  if (ascent_evals) cfg.ascent_evals = *ascent_evals;
  if (refine) cfg.refine = *refine;
  if (refine_incumbent) cfg.refine_incumbent = *refine_incumbent;
  cfg.delta = delta;
  cfg.constant_c = constant_c;
  cfg.timing = timing;
  if (bounds) {
    if ((*bounds)[0] >= (*bounds)[1]) throw UsageError("--bounds: lower bound must be below upper bound");
    cfg.bounds = {(*bounds)[0], (*bounds)[1]};
  }
  if (cfg.experiment == Task::sine || cfg.experiment == Task::step) {
    if (cfg.samples < 2) throw UsageError("--samples: need at least 2 samples for " + experiment);
  }
  if (cfg.experiment == Task::classif && cfg.width % 2 != 0) {
    throw UsageError("--width: must be a multiple of the input dimension 2");
  }
  if (cfg.strategy == StrategyName::theoretical && (!cfg.delta || !cfg.constant_c)) {
    throw UsageError("--strategy: theoretical requires --delta and --C");
  }
  return cfg;
}

inline RefinementStrategy make_strategy(const CliConfig& cfg) {
  switch (cfg.strategy) {
    case StrategyName::shallow:
      return RefinementStrategy::fixed_shallow();
    case StrategyName::deep:
      return RefinementStrategy::fixed_deep();
    case StrategyName::a1:
      return RefinementStrategy::abrupt_a1();
    case StrategyName::a2:
      return RefinementStrategy::fast_a2();
    case StrategyName::a3:
      return RefinementStrategy::slow_a3();
    case StrategyName::theoretical:
      return RefinementStrategy::theoretical(cfg.delta.value(), cfg.constant_c.value());
  }
  throw std::logic_error("unknown strategy");
}

inline ProblemSpec make_spec(const CliConfig& cfg) {
  ProblemSpec spec;
  spec.width = cfg.width;
  spec.horizon = cfg.final_time;
  spec.bounds = cfg.bounds;
  spec.rho = cfg.rho;
  spec.output = cfg.experiment == Task::classif ? OutputKind::thresholded_mean : OutputKind::mean;
  return spec;
}

inline Dataset make_dataset(const CliConfig& cfg) {
  switch (cfg.experiment) {
    case Task::sine:
      return gen_sine(cfg.samples);
    case Task::step:
      return gen_step(cfg.samples, cfg.seed);
    case Task::classif:
      return gen_classif(cfg.samples, cfg.seed);
  }
  throw std::logic_error("unknown task");
}

/// Per-run training configuration; run seeds are derived from the master seed
/// and the run index.
inline TrainConfig make_train_config(const CliConfig& cfg, std::size_t run_id, std::size_t threads) {
  TrainConfig tc;
  tc.tau = cfg.tau;
  tc.k_max = cfg.iters;
  tc.strategy = make_strategy(cfg);
  tc.integrator = cfg.integrator;
  tc.maximize.ascent.max_evals = cfg.ascent_evals;
  tc.maximize.multistart.n_refine = cfg.refine;
  tc.maximize.multistart.refine_incumbent = cfg.refine_incumbent;
  tc.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(run_id)});
  tc.threads = threads;
  tc.record_wall_time = cfg.timing;
  return tc;
}

struct ExperimentResult {
  std::vector<RunRecord> records;
  std::vector<std::string> failures;  // empty string = run completed
  Dataset dataset;
};

inline ExperimentResult run_experiment(const CliConfig& cfg) {
  const Dataset dataset = make_dataset(cfg);
  const ProblemSpec spec = make_spec(cfg);
  const std::size_t outer = std::min(cfg.threads, cfg.runs);
  const std::size_t inner = std::max<std::size_t>(1, cfg.threads / std::max<std::size_t>(outer, 1));

  ExperimentResult result{std::vector<RunRecord>(cfg.runs), std::vector<std::string>(cfg.runs), dataset};
  parallel_for(cfg.runs, outer, [&](std::size_t r) {
    try {
      result.records[r] =
          run_training(dataset.samples, spec, make_train_config(cfg, r, inner), make_test_sampler(dataset));
      result.failures[r] = result.records[r].abort_reason;
    } catch (const std::exception& e) {
      result.failures[r] = e.what();
    }
  });
  return result;
}

inline void ensure_out_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw csv::IoError("cannot create output directory " + dir.string());
}

inline void write_outputs(const CliConfig& cfg, const ExperimentResult& result) {
  ensure_out_dir(cfg.out_dir);
  const ProblemSpec spec = make_spec(cfg);

  std::vector<csv::LossHistoryRow> history;
  std::vector<csv::SummaryRow> summary;
  std::vector<csv::PredictionRow> predictions;
  const std::vector<Sample> grid = prediction_grid(cfg.experiment);
  for (std::size_t r = 0; r < result.records.size(); ++r) {
    const RunRecord& rec = result.records[r];
    if (rec.rows.empty()) continue;
    for (const auto& row : rec.rows) history.push_back({r, row});
    summary.push_back({r, rec.summary()});
    if (!rec.best_control) continue;
    for (const Sample& s : grid) {
      const double out = predict(s.x, *rec.best_control, spec, OutputKind::mean, cfg.integrator);
      const double y_pred = cfg.experiment == Task::classif ? prediction_filter(out) : out;
      predictions.push_back({r, std::vector<double>(s.x.data(), s.x.data() + s.x.size()), s.y, y_pred});
    }
  }
  csv::write_loss_history(cfg.out_dir / "loss_history.csv", history);
  csv::write_summary(cfg.out_dir / "summary.csv", summary);
  csv::write_predictions(cfg.out_dir / "predictions.csv", result.dataset.input_dim, predictions);
}

inline void print_table(const CliConfig& cfg, const ExperimentResult& result, std::ostream& out) {
  std::vector<RunRecord> done;
  for (const auto& r : result.records) {
    if (!r.rows.empty()) done.push_back(r);
  }
  if (done.empty()) return;
  const AggregateStats stats = aggregate_runs(done);
  char line[256];
  std::snprintf(line, sizeof line, "%-8s %-12s %5s %14s %14s %14s %14s\n", "task", "strategy", "runs", "median_min_J",
                "mean_min_J", "best_min_J", "median_test");
  out << line;
  std::snprintf(line, sizeof line, "%-8s %-12s %5zu %14.6g %14.6g %14.6g %14.6g\n",
                std::string(task_name(cfg.experiment)).c_str(), strategy_label(cfg.strategy).c_str(), done.size(),
                median(stats.min_train_loss),
                std::accumulate(stats.min_train_loss.begin(), stats.min_train_loss.end(), 0.0) /
                    static_cast<double>(stats.min_train_loss.size()),
                *std::min_element(stats.min_train_loss.begin(), stats.min_train_loss.end()),
                median(stats.test_at_best));
  out << line;
  if (cfg.experiment == Task::classif) {
    const ProblemSpec spec = make_spec(cfg);
    const std::vector<Sample> grid = prediction_grid(Task::classif);
    std::vector<double> rates;
    for (const auto& r : done) {
      if (r.best_control) rates.push_back(mismatch_rate(*r.best_control, spec, grid, cfg.integrator));
    }
    if (!rates.empty()) {
      out << "grid mismatch rate: median " << median(rates) << ", best "
          << *std::min_element(rates.begin(), rates.end()) << '\n';
    }
  }
}

/// Runs the configured experiment, writes the CSVs and prints the aggregate
/// table. Exit status 0 when at least one run completed.
inline int run_experiment_command(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    ensure_out_dir(cfg.out_dir);
  } catch (const csv::IoError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  ExperimentResult result = run_experiment(cfg);
  std::size_t completed = 0;
  for (std::size_t r = 0; r < result.failures.size(); ++r) {
    if (result.failures[r].empty()) {
      ++completed;
    } else {
      err << "run " << r << " aborted: " << result.failures[r] << '\n';
    }
  }
  try {
    write_outputs(cfg, result);
  } catch (const csv::IoError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  print_table(cfg, result, out);
  return completed > 0 ? 0 : 1;
}

}  // namespace amsa::cli

#include "legsafe/app/bench.hpp"
#include "legsafe/app/config.hpp"
#include "legsafe/app/experiments.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

using namespace legsafe;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitError = 3;

/// Flags shared by the scenario-driven subcommands.
struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;

  void attach(CLI::App* cmd, bool config_required, bool out_required, const std::string& out_help) {
    auto* c = cmd->add_option("--config", config, "Scenario YAML file")->check(CLI::ExistingFile);
    if (config_required) c->required();
    auto* o = cmd->add_option("--out", out, out_help);
    if (out_required) o->required();
    cmd->add_option("--seed", seed, "Root seed; overrides the config");
    cmd->add_option("--set", sets, "Override a config entry, dotted.key=value (repeatable)");
  }

  app::ScenarioSpec load() const {
    std::vector<std::string> overrides = sets;
    if (seed) overrides.push_back(fmt::format("seed={}", *seed));
    return app::load_scenario(config, overrides);
  }
};

std::ofstream open_out(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

void write_log(const std::string& path, const sim::TrajectoryLog& log) {
  auto out = open_out(path);
  sim::write_trajectory_csv(out, log);
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
  std::filesystem::path p(path);
  const std::string ext = p.has_extension() ? p.extension().string() : ".csv";
  return (p.parent_path() / (p.stem().string() + suffix + ext)).string();
}

int cmd_simulate(const Common& c) {
  const auto spec = c.load();
  const auto log = app::run_simulation(spec);
  write_log(c.out, log);
  const auto grf = sim::measure_grf_error(log, spec.friction_demo.blanking);
  std::cout << fmt::format("simulated {} control steps ({:.3f} s), log written to {}\n", log.steps.size(),
                           log.steps.size() * spec.scenario.control_dt, c.out);
  std::cout << fmt::format("GRF MAE vertical {:.3f} N  lateral {:.3f} N over {} samples\n", grf.mae_vertical,
                           grf.mae_lateral, grf.samples);
  std::cout << fmt::format("min swing h {:+.5f} m\n", app::min_swing_h(log));
  if (log.failed) {
    std::cerr << "robot failure: " << log.failure_reason << "\n";
    return kExitFailure;
  }
  return 0;
}

int cmd_friction_demo(const Common& c) {
  const auto spec = c.load();
  const auto r = app::run_friction_demo(spec);
  write_log(c.out, r.log);
  app::write_friction_summary(std::cout, r);
  if (r.log.failed) return kExitFailure;
  if (!r.certified) {
    std::cerr << "friction cone certification failed\n";
    return kExitFailure;
  }
  return 0;
}

int cmd_clearance_demo(const Common& c) {
  const auto spec = c.load();
  const auto r = app::run_clearance_demo(spec);
  const auto nominal_path = with_suffix(c.out, "_nominal");
  const auto filtered_path = with_suffix(c.out, "_filtered");
  write_log(nominal_path, r.nominal.log);
  write_log(filtered_path, r.filtered.log);
  app::write_clearance_summary(std::cout, r);
  std::cout << "logs: " << nominal_path << ", " << filtered_path << "\n";
  return r.filtered.log.failed ? kExitFailure : 0;
}

int cmd_gen_data(const Common& c) {
  const auto spec = c.load();
  int last = -1;
  const auto data = app::generate_data(spec, [&](int done, int total) {
    const int pct = 100 * done / std::max(total, 1);
    if (pct / 10 != last / 10) {
      std::cerr << fmt::format("  {} / {} samples\n", done, total);
      last = pct;
    }
  });
  const auto parent = std::filesystem::path(c.out).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  estimator::save_dataset(c.out, data);
  std::cout << fmt::format("dataset: {} samples (train {}, val {}, test {}), window {} x {} at {} s -> {}\n",
                           data.size(), data.indices(estimator::Split::kTrain).size(),
                           data.indices(estimator::Split::kVal).size(), data.indices(estimator::Split::kTest).size(),
                           data.spec.timesteps, data.spec.features(), data.spec.dt, c.out);
  return 0;
}

int cmd_train(const Common& c, const std::string& data_path, const std::string& metrics_path) {
  const auto spec = c.load();
  const auto data = estimator::load_dataset(data_path);
  const auto outcome = app::train_estimator(spec, data, [](const estimator::EpochMetrics& m) {
    std::cout << fmt::format("epoch {:3d}  step {:6d}  lr {:.2e}  train mse {:.5f} mae {:.4f}  val mse {:.5f} mae {:.4f}\n",
                             m.epoch, m.step, m.learning_rate, m.train_mse, m.train_mae, m.val_mse, m.val_mae);
  });
  const auto parent = std::filesystem::path(c.out).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  estimator::save_checkpoint(c.out, outcome.checkpoint);
  if (!metrics_path.empty()) {
    auto out = open_out(metrics_path);
    out << "# " << app::kMetricsSchema << " v" << app::kEstimatorCsvVersion << "\n";
    estimator::write_metrics_csv(out, outcome.result.history);
  }
  std::cout << fmt::format("best epoch {} after {} steps, checkpoint -> {}\n", outcome.result.best_epoch,
                           outcome.result.steps, c.out);
  return 0;
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& data_path, const std::string& split_name,
                 const std::string& out_path) {
  estimator::Split split = estimator::Split::kTest;
  if (split_name == "train") split = estimator::Split::kTrain;
  else if (split_name == "val") split = estimator::Split::kVal;
  const auto ck = estimator::load_checkpoint(checkpoint_path);
  const auto data = estimator::load_dataset(data_path);
  const auto r = app::evaluate_estimator(ck, data, split);
  if (!out_path.empty()) {
    auto out = open_out(out_path);
    app::write_scatter_csv(out, r);
  }
  const double gain = r.baseline_mae > 0.0 ? 1.0 - r.metrics.mae / r.baseline_mae : 0.0;
  std::cout << fmt::format("{} split: {} samples  MAE {:.4f}  MSE {:.5f}\n", split_name, r.labels.size(),
                           r.metrics.mae, r.metrics.mse);
  std::cout << fmt::format("constant baseline {:.4f}: MAE {:.4f}  improvement {:.1f}%\n", r.baseline_constant,
                           r.baseline_mae, 100.0 * gain);
  return 0;
}

int cmd_bench(const Common& c, int qp_steps, int dyn_reps, const std::vector<int>& lengths, int reps) {
  const auto spec = c.load();
  std::vector<app::BenchRow> rows;
  rows.push_back(app::bench_filter_qp(spec, qp_steps));
  for (auto& r : app::bench_dynamics(spec, dyn_reps)) rows.push_back(r);
  for (auto& r : app::bench_attention(spec, lengths, reps)) rows.push_back(r);
  if (!c.out.empty()) {
    auto out = open_out(c.out);
    app::write_bench_csv(out, rows);
  }
  app::write_bench_csv(std::cout, rows);
  return 0;
}

/// Parses a CSV with a `# name vN` first line, a fixed header and numeric rows.
void check_simple_csv(std::istream& in, const std::string& first, const std::vector<std::string>& header,
                      int text_columns) {
  std::string line;
  std::getline(in, line);
  if (line != first) throw std::runtime_error("unsupported schema line: " + line);
  std::getline(in, line);
  std::string expected;
  for (std::size_t i = 0; i < header.size(); ++i) expected += (i ? "," : "") + header[i];
  if (line != expected) throw std::runtime_error("header mismatch, expected " + expected);
  long row = 2;
  while (std::getline(in, line)) {
    ++row;
    std::stringstream ss(line);
    std::string cell;
    std::size_t n = 0;
    while (std::getline(ss, cell, ',')) {
      if (static_cast<int>(n) >= text_columns) {
        std::size_t pos = 0;
        try {
          std::stod(cell, &pos);
        } catch (const std::exception&) {
          pos = std::string::npos;
        }
        if (pos != cell.size() && cell != "nan" && cell != "inf" && cell != "-inf") {
          throw std::runtime_error(fmt::format("line {}: column {} is not numeric", row, n + 1));
        }
      }
      ++n;
    }
    if (n != header.size()) throw std::runtime_error(fmt::format("line {}: {} fields, expected {}", row, n, header.size()));
  }
}

int cmd_schema_check(const std::vector<std::string>& files) {
  int bad = 0;
  for (const auto& path : files) {
    std::ifstream in(path);
    try {
      if (!in) throw std::runtime_error("cannot open");
      std::string first;
      std::getline(in, first);
      in.seekg(0);
      const auto tag = [&](const char* name, int version) { return fmt::format("# {} v{}", name, version); };
      std::string kind;
      if (first.rfind(tag(sim::kTrajectorySchema, sim::kTrajectorySchemaVersion) + " ", 0) == 0) {
        const auto log = sim::read_trajectory_csv(in);
        kind = fmt::format("trajectory, {} rows", log.steps.size());
      } else if (first == tag(app::kScatterSchema, app::kEstimatorCsvVersion)) {
        check_simple_csv(in, first, {"prediction", "label"}, 0);
        kind = "scatter";
      } else if (first == tag(app::kMetricsSchema, app::kEstimatorCsvVersion)) {
        check_simple_csv(in, first, {"epoch", "step", "learning_rate", "train_mse", "train_mae", "val_mse", "val_mae"},
                         0);
        kind = "metrics";
      } else if (first == tag(app::kBenchSchema, app::kBenchSchemaVersion)) {
        check_simple_csv(in, first, {"name", "size", "samples", "min_s", "median_s", "p95_s", "max_s", "mean_s"}, 1);
        kind = "bench";
      } else {
        throw std::runtime_error("unknown schema line: " + first);
      }
      std::cout << path << ": ok (" << kind << ")\n";
    } catch (const std::exception& e) {
      std::cout << path << ": INVALID: " << e.what() << "\n";
      ++bad;
    }
  }
  return bad == 0 ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Legged-robot safety filter experiments"};
  cli.require_subcommand(1);

  Common sim_c, fric_c, clear_c, gen_c, train_c, bench_c;
  auto* simulate = cli.add_subcommand("simulate", "Run one closed-loop scenario and write its trajectory CSV");
  sim_c.attach(simulate, true, true, "Trajectory CSV");
  auto* friction = cli.add_subcommand("friction-demo", "Nominal trot, then the friction-constrained filter mid-run");
  fric_c.attach(friction, true, true, "Trajectory CSV");
  auto* clearance = cli.add_subcommand("clearance-demo", "Paired filter off/on runs against the obstacle profile");
  clear_c.attach(clearance, true, true, "CSV path; _nominal and _filtered are appended to the stem");
  auto* gen = cli.add_subcommand("gen-data", "Generate the friction estimation dataset");
  gen_c.attach(gen, true, true, "Dataset file");
  auto* train = cli.add_subcommand("train", "Train the friction estimator");
  train_c.attach(train, true, true, "Checkpoint file");
  std::string train_data, train_metrics;
  train->add_option("--data", train_data, "Dataset file")->required()->check(CLI::ExistingFile);
  train->add_option("--metrics", train_metrics, "Per-epoch metrics CSV");
  auto* evaluate = cli.add_subcommand("evaluate", "Evaluate a checkpoint on a dataset split");
  std::string eval_ck, eval_data, eval_out, eval_split = "test";
  evaluate->add_option("--checkpoint", eval_ck, "Checkpoint file")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--data", eval_data, "Dataset file")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", eval_out, "Prediction/label scatter CSV");
  evaluate->add_option("--split", eval_split, "Split to evaluate")->check(CLI::IsMember({"train", "val", "test"}));
  auto* bench = cli.add_subcommand("bench", "Microbenchmarks: filter QP, dynamics, attention scaling");
  bench_c.attach(bench, true, false, "Timing CSV");
  int qp_steps = 500, dyn_reps = 2000, att_reps = 7;
  std::vector<int> lengths{120, 240, 480, 960, 1920};
  bench->add_option("--qp-steps", qp_steps, "Control steps of filter problems to time")->check(CLI::PositiveNumber);
  bench->add_option("--dyn-reps", dyn_reps, "Random states for dynamics timing")->check(CLI::PositiveNumber);
  bench->add_option("--lengths", lengths, "Attention sequence lengths")->delimiter(',');
  bench->add_option("--reps", att_reps, "Attention repetitions (best is kept)")->check(CLI::PositiveNumber);
  auto* schema = cli.add_subcommand("schema-check", "Validate CSV outputs against their versioned schemas");
  std::vector<std::string> schema_files;
  schema->add_option("files", schema_files, "CSV files")->required();

  CLI11_PARSE(cli, argc, argv);

  try {
    if (*simulate) return cmd_simulate(sim_c);
    if (*friction) return cmd_friction_demo(fric_c);
    if (*clearance) return cmd_clearance_demo(clear_c);
    if (*gen) return cmd_gen_data(gen_c);
    if (*train) return cmd_train(train_c, train_data, train_metrics);
    if (*evaluate) return cmd_evaluate(eval_ck, eval_data, eval_split, eval_out);
    if (*bench) return cmd_bench(bench_c, qp_steps, dyn_reps, lengths, att_reps);
    if (*schema) return cmd_schema_check(schema_files);
  } catch (const app::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const estimator::FormatError& e) {
    std::cerr << "file format error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

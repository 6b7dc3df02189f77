#include "legsafe/app/experiments.hpp"

#include "legsafe/model/model_io.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <ostream>

namespace legsafe::app {

namespace {

sim::TrajectoryLog run(const Setup& setup, const ScenarioSpec& spec, const filter::FilterConfig& filter,
                       const sim::ScenarioSettings& settings) {
  const gait::TrotController controller(setup.model, setup.gait);
  return sim::run_scenario(setup.model, controller, filter, spec.terrain, spec.sim, settings);
}

int count_non_optimal(const sim::TrajectoryLog& log) {
  int n = 0;
  for (const auto& r : log.steps) {
    if (r.filter_active && r.status != qp::to_string(qp::QpStatus::kOptimal)) ++n;
  }
  return n;
}

double max_interference(const sim::TrajectoryLog& log) {
  double m = 0.0;
  for (const auto& r : log.steps) {
    if (r.filter_active) m = std::max(m, r.interference);
  }
  return m;
}

}  // namespace

Setup make_setup(const ScenarioSpec& spec) {
  Setup s{model::load_model(spec.model_path), spec.gait, spec.filter};
  s.filter.gait_period = spec.gait.schedule.gait_period;
  s.filter.obstacle_profile =
      build_obstacle(spec.obstacle, spec.gait.schedule, spec.terrain.height(0.0, 0.0));
  return s;
}

sim::TrajectoryLog run_simulation(const ScenarioSpec& spec) {
  const Setup setup = make_setup(spec);
  return run(setup, spec, setup.filter, spec.scenario);
}

double min_swing_h(const sim::TrajectoryLog& log) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& r : log.steps) {
    for (Eigen::Index f = 0; f < r.h.size(); ++f) {
      if (std::isfinite(r.h[f])) m = std::min(m, r.h[f]);
    }
  }
  return m;
}

FrictionDemoResult run_friction_demo(const ScenarioSpec& spec) {
  const Setup setup = make_setup(spec);
  filter::FilterConfig filter = setup.filter;
  filter.mu = spec.friction_demo.mu;
  filter.friction_enabled = true;
  sim::ScenarioSettings settings = spec.scenario;
  settings.filter_enabled = true;
  settings.filter_start = spec.friction_demo.activate_at;

  FrictionDemoResult r;
  r.log = run(setup, spec, filter, settings);
  r.mu = filter.mu;
  r.activate_at = settings.filter_start;
  const double blanking = spec.friction_demo.blanking;
  r.pre = sim::friction_statistics(r.log, r.mu, blanking, 0.0, r.activate_at);
  r.post = sim::friction_statistics(r.log, r.mu, blanking, r.activate_at, std::numeric_limits<double>::infinity());
  for (const auto& s : r.log.steps) {
    if (!s.filter_active) continue;
    ++r.filter_steps;
    r.max_kkt_primal = std::max(r.max_kkt_primal, s.kkt_primal);
    r.max_kkt_dual = std::max(r.max_kkt_dual, s.kkt_dual);
    r.max_kkt_complementarity = std::max(r.max_kkt_complementarity, s.kkt_complementarity);
  }
  r.non_optimal_steps = count_non_optimal(r.log);
  r.certified = !r.log.failed && r.post.samples > 0 && r.post.max_violation <= FrictionDemoResult::kConeTolerance;
  return r;
}

ClearanceDemoResult run_clearance_demo(const ScenarioSpec& spec) {
  const Setup setup = make_setup(spec);
  if (setup.filter.obstacle_profile.empty()) throw ConfigError("clearance demo needs an obstacle");
  filter::FilterConfig filter = setup.filter;
  filter.cbf_enabled = true;
  filter.friction_enabled = spec.clearance_demo.friction_rows;

  ClearanceDemoResult r;
  for (bool on : {false, true}) {
    sim::ScenarioSettings settings = spec.scenario;
    settings.filter_enabled = on;
    ClearanceRun& cr = on ? r.filtered : r.nominal;
    cr.log = run(setup, spec, filter, settings);
    cr.min_h = min_swing_h(cr.log);
    cr.non_optimal_steps = count_non_optimal(cr.log);
    cr.max_interference = max_interference(cr.log);
  }

  const double frac = spec.clearance_demo.slack_fraction;
  for (const auto& s : r.filtered.log.steps) {
    if (!s.filter_active) continue;
    bool slack = true;
    for (Eigen::Index f = 0; f < s.ecbf_slack.size(); ++f) {
      if (std::isnan(s.ecbf_rhs[f])) continue;
      if (!(s.ecbf_slack[f] >= frac * std::abs(s.ecbf_rhs[f]))) slack = false;
    }
    if (!slack) continue;
    ++r.slack_steps;
    r.max_interference_slack = std::max(r.max_interference_slack, s.interference);
  }
  return r;
}

estimator::Dataset generate_data(const ScenarioSpec& spec, const std::function<void(int, int)>& progress) {
  const auto m = model::load_model(spec.model_path);
  return estimator::generate_dataset(m, spec.estimator.data, spec.gait, spec.sim, spec.estimator.window, progress);
}

TrainOutcome train_estimator(const ScenarioSpec& spec, const estimator::Dataset& data,
                             const std::function<void(const estimator::EpochMetrics&)>& on_epoch) {
  data.validate();
  if (data.spec.timesteps != spec.estimator.window.timesteps || data.spec.num_joints != spec.estimator.window.num_joints) {
    throw ConfigError("dataset window does not match estimator.window");
  }
  const auto train_idx = data.indices(estimator::Split::kTrain);
  const auto val_idx = data.indices(estimator::Split::kVal);
  if (train_idx.empty()) throw ConfigError("dataset has no training samples");

  TrainOutcome out;
  auto& ck = out.checkpoint;
  ck.network = spec.estimator.network;
  ck.network.seq_len = data.spec.seq_len();
  ck.spec = data.spec;
  std::vector<const Eigen::MatrixXd*> fit;
  for (auto i : train_idx) fit.push_back(&data.windows[i]);
  ck.normalizer = estimator::FeatureNormalizer::fit(fit);

  std::mt19937_64 rng(spec.estimator.init_seed);
  auto init = estimator::init_parameters(ck.network, rng);
  out.result = estimator::train(ck.network, std::move(init), estimator::make_tokens(data, train_idx, ck.normalizer),
                                estimator::select_labels(data, train_idx),
                                estimator::make_tokens(data, val_idx, ck.normalizer),
                                estimator::select_labels(data, val_idx), spec.estimator.training, on_epoch);
  ck.params = out.result.params;
  return out;
}

EvalOutcome evaluate_estimator(const estimator::Checkpoint& checkpoint, const estimator::Dataset& data,
                               estimator::Split split) {
  data.validate();
  if (data.spec.seq_len() != checkpoint.network.seq_len || data.spec.features() != checkpoint.normalizer.mean.size()) {
    throw ConfigError("dataset does not match the checkpoint's window");
  }
  const auto idx = data.indices(split);
  if (idx.empty()) throw ConfigError("dataset split is empty");
  EvalOutcome out;
  out.labels = estimator::select_labels(data, idx);
  out.metrics =
      estimator::evaluate(checkpoint.params, checkpoint.network, estimator::make_tokens(data, idx, checkpoint.normalizer),
                          out.labels);
  const auto train_labels = estimator::select_labels(data, data.indices(estimator::Split::kTrain));
  const auto& ref = train_labels.empty() ? out.labels : train_labels;
  out.baseline_constant = std::accumulate(ref.begin(), ref.end(), 0.0) / static_cast<double>(ref.size());
  out.baseline_mae = estimator::constant_baseline_mae(out.labels, out.baseline_constant);
  return out;
}

void write_scatter_csv(std::ostream& out, const EvalOutcome& eval) {
  out << "# " << kScatterSchema << " v" << kEstimatorCsvVersion << "\n";
  out << "prediction,label\n";
  for (std::size_t i = 0; i < eval.labels.size(); ++i) {
    out << fmt::format("{:.17g},{:.17g}\n", eval.metrics.predictions[i], eval.labels[i]);
  }
}

void write_friction_summary(std::ostream& out, const FrictionDemoResult& r) {
  const double mt = filter::effective_friction(r.mu);
  out << fmt::format("friction demo: mu = {:.3f} (pyramid {:.4f}), filter from t = {:.3f} s\n", r.mu, mt,
                     r.activate_at);
  if (r.log.failed) out << "robot failure: " << r.log.failure_reason << "\n";
  auto phase = [&](const char* name, const sim::FrictionStats& s) {
    out << fmt::format("  {:<5} samples {:6d}  mean |lateral| true {:8.3f} N  pred {:8.3f} N  "
                       "max cone ratio {:.4g}  max violation {:.4g} N\n",
                       name, s.samples, s.mean_abs_lateral_true, s.mean_abs_lateral_pred, s.max_ratio,
                       s.max_violation);
  };
  phase("pre", r.pre);
  phase("post", r.post);
  out << fmt::format("  filter steps {}  non-optimal {}  max KKT primal {:.3g} dual {:.3g} compl {:.3g}\n",
                     r.filter_steps, r.non_optimal_steps, r.max_kkt_primal, r.max_kkt_dual,
                     r.max_kkt_complementarity);
  out << "  certified: " << (r.certified ? "yes" : "no") << "\n";
}

void write_clearance_summary(std::ostream& out, const ClearanceDemoResult& r) {
  out << "clearance demo\n";
  auto line = [&](const char* name, const ClearanceRun& c) {
    out << fmt::format("  {:<8} min h {:+.5f} m  non-optimal {}  max interference {:.4g}{}\n", name, c.min_h,
                       c.non_optimal_steps, c.max_interference,
                       c.log.failed ? "  robot failure: " + c.log.failure_reason : "");
  };
  line("nominal", r.nominal);
  line("filtered", r.filtered);
  out << fmt::format("  slack steps {}  max interference when slack {:.4g}\n", r.slack_steps,
                     r.max_interference_slack);
}

}  // namespace legsafe::app

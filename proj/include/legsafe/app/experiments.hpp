#pragma once

#include "legsafe/app/config.hpp"
#include "legsafe/model/robot_model.hpp"
#include "legsafe/estimator/dataset.hpp"
#include "legsafe/estimator/training.hpp"
#include "legsafe/sim/scenario.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace legsafe::app {

/// Model, controller and filter configuration assembled from a spec.
struct Setup {
  model::RobotModel model;
  gait::TrotConfig gait;
  filter::FilterConfig filter;
};

Setup make_setup(const ScenarioSpec& spec);

/// run_scenario with the spec's filter switch and obstacle.
sim::TrajectoryLog run_simulation(const ScenarioSpec& spec);

struct FrictionDemoResult {
  sim::TrajectoryLog log;
  double mu = 0.0;
  double activate_at = 0.0;
  /// Cone statistics before and after the filter activates.
  sim::FrictionStats pre;
  sim::FrictionStats post;
  int filter_steps = 0;
  int non_optimal_steps = 0;
  double max_kkt_primal = 0.0;
  double max_kkt_dual = 0.0;
  double max_kkt_complementarity = 0.0;
  /// Every non-blanked stance sample after activation lies in the pyramid
  /// within kConeTolerance.
  bool certified = false;
  static constexpr double kConeTolerance = 1e-6;
};

/// Nominal trot first, then the filter with friction_demo.mu from
/// friction_demo.activate_at on.
FrictionDemoResult run_friction_demo(const ScenarioSpec& spec);

struct ClearanceRun {
  sim::TrajectoryLog log;
  /// Smallest barrier value over swing samples; +inf without swing samples.
  double min_h = 0.0;
  int non_optimal_steps = 0;
  double max_interference = 0.0;
};

struct ClearanceDemoResult {
  ClearanceRun nominal;
  ClearanceRun filtered;
  /// Largest interference over filtered steps whose ECBF rows all have
  /// slack of at least slack_fraction |rhs|, and how many such steps exist.
  double max_interference_slack = 0.0;
  int slack_steps = 0;
};

/// Paired runs against the obstacle with the filter off and on.
ClearanceDemoResult run_clearance_demo(const ScenarioSpec& spec);

double min_swing_h(const sim::TrajectoryLog& log);

/// Dataset for the spec's estimator settings, using its gait and contact model.
estimator::Dataset generate_data(const ScenarioSpec& spec, const std::function<void(int, int)>& progress = nullptr);

struct TrainOutcome {
  estimator::Checkpoint checkpoint;
  estimator::TrainResult result;
};

/// Fits the normalizer on the training split and trains from a seeded
/// initialization.
TrainOutcome train_estimator(const ScenarioSpec& spec, const estimator::Dataset& data,
                             const std::function<void(const estimator::EpochMetrics&)>& on_epoch = nullptr);

struct EvalOutcome {
  estimator::EvalMetrics metrics;
  std::vector<double> labels;
  /// Mean training label and the MAE of predicting it everywhere.
  double baseline_constant = 0.0;
  double baseline_mae = 0.0;
};

EvalOutcome evaluate_estimator(const estimator::Checkpoint& checkpoint, const estimator::Dataset& data,
                               estimator::Split split = estimator::Split::kTest);

inline constexpr const char* kScatterSchema = "legsafe-scatter";
inline constexpr const char* kMetricsSchema = "legsafe-metrics";
inline constexpr int kEstimatorCsvVersion = 1;

/// Prediction against label per evaluated sample.
void write_scatter_csv(std::ostream& out, const EvalOutcome& eval);

void write_friction_summary(std::ostream& out, const FrictionDemoResult& r);
void write_clearance_summary(std::ostream& out, const ClearanceDemoResult& r);

}  // namespace legsafe::app

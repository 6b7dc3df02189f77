#pragma once

#include "legsafe/estimator/dataset.hpp"
#include "legsafe/estimator/network.hpp"
#include "legsafe/estimator/training.hpp"
#include "legsafe/filter/safety_filter.hpp"
#include "legsafe/gait/trot.hpp"
#include "legsafe/sim/scenario.hpp"
#include "legsafe/sim/simulator.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace legsafe::app {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ObstacleKind { kNone, kBump, kPolynomial };

/// Clearance profile applied to each listed foot over its swing window.
/// kBump is 16 peak s^2 (1 - s)^2 + base; kPolynomial takes ascending
/// coefficients in the local swing phase s.
struct ObstacleSpec {
  ObstacleKind kind = ObstacleKind::kNone;
  double peak = 0.09;
  double base = -0.005;
  std::vector<double> coefficients;
  std::vector<int> feet{0, 1, 2, 3};
};

struct FrictionDemoSpec {
  /// Friction coefficient given to the filter once it activates.
  double mu = 0.2;
  double activate_at = 3.0;
  double blanking = 0.02;
};

struct ClearanceDemoSpec {
  /// The clearance runs use ECBF and torque rows only unless this is set.
  bool friction_rows = false;
  /// Relative ECBF slack above which a step counts as unconstrained.
  double slack_fraction = 0.1;
};

struct EstimatorSpec {
  estimator::GenerationConfig data;
  estimator::WindowSpec window;
  estimator::NetworkConfig network;
  estimator::TrainConfig training;
  /// Seed for the network weight initialization.
  std::uint64_t init_seed = 1;
};

struct ScenarioSpec {
  std::string preset = "simulate";
  std::string model_path;
  std::uint64_t seed = 1;
  sim::Terrain terrain;
  sim::SimConfig sim;
  sim::ScenarioSettings scenario;
  gait::TrotConfig gait;
  filter::FilterConfig filter;
  ObstacleSpec obstacle;
  FrictionDemoSpec friction_demo;
  ClearanceDemoSpec clearance_demo;
  EstimatorSpec estimator;

  /// Propagates `seed` into every component seed and checks all ranges.
  void finalize();
};

/// Parses a scenario file. Overrides are `dotted.key=value` strings applied
/// before validation; unknown keys anywhere are rejected. A relative model
/// path resolves against the config file's directory.
ScenarioSpec load_scenario(const std::string& path, const std::vector<std::string>& overrides = {});
ScenarioSpec parse_scenario(const std::string& yaml_text, const std::string& base_dir,
                            const std::vector<std::string>& overrides = {});

/// Per-foot clearance profiles for the trot schedule; empty for kNone.
std::vector<filter::FootClearance> build_obstacle(const ObstacleSpec& spec, const gait::GaitSchedule& schedule,
                                                  double terrain_height);

}  // namespace legsafe::app

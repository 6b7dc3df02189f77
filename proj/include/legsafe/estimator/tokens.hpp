#pragma once

#include "legsafe/sim/scenario.hpp"

#include <Eigen/Dense>

#include <vector>

namespace legsafe::estimator {

struct WindowSpec {
  int timesteps = 40;
  double dt = 0.03;
  int num_joints = 12;

  void validate() const;
  double duration() const { return timesteps * dt; }
  /// Signals per timestep: q, qd and tau for every joint.
  int features() const { return 3 * num_joints; }
  int seq_len() const { return timesteps * num_joints; }
};

/// Samples the log at start_time + i dt for i < timesteps. Row i holds
/// (q_j, qd_j, tau_j) in columns 3j, 3j + 1, 3j + 2, tau being the applied
/// torque. Throws std::invalid_argument when the log does not cover the
/// whole window.
Eigen::MatrixXd tokenize(const sim::TrajectoryLog& log, double start_time, const WindowSpec& spec);

/// Per-column standardization fitted on training windows. Standard
/// deviations are floored so constant columns map to zero.
struct FeatureNormalizer {
  static constexpr double kStdFloor = 1e-8;
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;

  static FeatureNormalizer fit(const std::vector<const Eigen::MatrixXd*>& windows);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& raw) const;
};

/// Reshapes a (timesteps x 3J) window into (T J x 3) tokens; token t J + j
/// carries joint j at timestep t.
Eigen::MatrixXd to_tokens(const Eigen::MatrixXd& window, int num_joints);

}  // namespace legsafe::estimator

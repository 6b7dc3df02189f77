#pragma once

#include "legsafe/filter/safety_filter.hpp"
#include "legsafe/gait/trot.hpp"
#include "legsafe/sim/simulator.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace legsafe::sim {

struct ScenarioSettings {
  double duration = 6.0;
  double control_dt = 0.002;
  bool filter_enabled = false;
  /// The filter acts from this time on; before it the nominal torque is applied.
  double filter_start = 0.0;
  /// The run stops as failed when the base drops below this fraction of the
  /// standing height above the terrain offset.
  double failure_height_fraction = 0.5;
  /// Standard deviation of the initial joint-angle perturbation, rad.
  double initial_joint_noise = 0.0;
  std::uint64_t seed = 1;

  void validate(const SimConfig& sim) const;
};

/// One control step. Per-foot vectors have one entry per model foot, force
/// vectors hold (x, y, z) per foot, and per-joint vectors follow actuator order.
struct StepRecord {
  double t = 0.0;
  double phi = 0.0;
  Eigen::Vector3d base_position = Eigen::Vector3d::Zero();
  bool filter_active = false;
  std::string status = "nominal";
  int iterations = 0;
  bool fallback = false;
  double interference = 0.0;
  double kkt_primal = 0.0;
  double kkt_dual = 0.0;
  double kkt_complementarity = 0.0;
  std::vector<int> stance;
  Eigen::VectorXd h;
  Eigen::VectorXd ecbf_slack;
  Eigen::VectorXd ecbf_rhs;
  Eigen::VectorXd lambda_pred;
  Eigen::VectorXd lambda_true;
  Eigen::VectorXd q;
  Eigen::VectorXd qd;
  Eigen::VectorXd u_nominal;
  Eigen::VectorXd u_applied;
};

struct TrajectoryLog {
  int num_feet = 0;
  int num_joints = 0;
  std::vector<StepRecord> steps;
  bool failed = false;
  std::string failure_reason;
};

/// Closed loop: the trot controller runs at the control rate, the optional
/// filter transforms its torque, and the simulator advances with substeps.
/// `filter_config` supplies the clearance profile used for the h columns
/// even when the filter is off.
TrajectoryLog run_scenario(const model::RobotModel& model, const gait::TrotController& controller,
                           const filter::FilterConfig& filter_config, const Terrain& terrain,
                           const SimConfig& sim_config, const ScenarioSettings& settings);

inline constexpr const char* kTrajectorySchema = "legsafe-trajectory";
inline constexpr int kTrajectorySchemaVersion = 1;

std::vector<std::string> trajectory_columns(int num_feet, int num_joints);
/// Header line `# legsafe-trajectory v1 feet=F joints=J`, then the column
/// names, then one row per step.
void write_trajectory_csv(std::ostream& out, const TrajectoryLog& log);
TrajectoryLog read_trajectory_csv(std::istream& in);

/// Time since the current scheduled stance began, per record and foot; -1 in swing.
std::vector<std::vector<double>> stance_age(const TrajectoryLog& log);

struct GrfError {
  double mae_vertical = 0.0;
  double mae_lateral = 0.0;
  int samples = 0;
};

/// Mean absolute difference between predicted and simulated contact forces
/// over scheduled stance samples older than `blanking` seconds. Lateral
/// pools the x and y components.
GrfError measure_grf_error(const TrajectoryLog& log, double blanking = 0.02, double t_from = 0.0,
                           double t_to = 1e300);

struct FrictionStats {
  int samples = 0;
  /// max over samples of max(|lx|, |ly|) - mu~ lz
  double max_violation = -1e300;
  /// max over samples of max(|lx|, |ly|) / (mu~ lz)
  double max_ratio = 0.0;
  double mean_abs_lateral_true = 0.0;
  double mean_abs_lateral_pred = 0.0;
};

/// Cone statistics of the predicted forces over non-blanked stance samples
/// with t in [t_from, t_to).
FrictionStats friction_statistics(const TrajectoryLog& log, double mu, double blanking,
                                  double t_from, double t_to);

}  // namespace legsafe::sim

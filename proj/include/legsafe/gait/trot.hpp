#pragma once

#include "legsafe/model/robot_model.hpp"

#include <Eigen/Dense>

#include <array>
#include <vector>

namespace legsafe::gait {

struct GaitSchedule {
  double gait_period = 0.6;
  /// Fraction of the period each foot spends in stance.
  double duty = 0.5;
  /// Diagonal pairs by model foot index: pair A starts its stance at phi = 0,
  /// pair B at phi = 0.5.
  std::array<int, 2> pair_a{0, 3};
  std::array<int, 2> pair_b{1, 2};
  /// Fore-aft foot travel per stance; negative means body_velocity_target *
  /// stance duration.
  double step_length = -1.0;
  double step_height = 0.06;
  double body_velocity_target = 0.2;

  void validate() const;
  double stance_duration() const { return duty * gait_period; }
  double swing_duration() const { return (1.0 - duty) * gait_period; }
  double effective_step_length() const;
  /// Phase at which the foot's stance begins (0 for pair A, 0.5 for pair B).
  double stance_start(int foot) const;
};

model::ContactSet contact_schedule(double t, const GaitSchedule& schedule);

/// Progress through the current swing in [0, 1), or -1 during stance.
double swing_phase(int foot, double t, const GaitSchedule& schedule);
/// Progress through the current stance in [0, 1), or -1 during swing.
double stance_phase(int foot, double t, const GaitSchedule& schedule);

/// Foot point relative to its nominal stance location, world aligned. Rates
/// are with respect to time.
struct FootTarget {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d acceleration = Eigen::Vector3d::Zero();
};

/// Swing arc at local phase s: fore-aft cubic from -L/2 to +L/2 with zero
/// end velocities, vertical step_height sin^2(pi s).
FootTarget swing_trajectory(int foot, double s, const GaitSchedule& schedule);
/// Stance sweep at local phase sigma: linear from +L/2 to -L/2 at ground level.
FootTarget stance_trajectory(int foot, double sigma, const GaitSchedule& schedule);

struct IkResult {
  Eigen::VectorXd joint_positions;  // n_va, actuator order
  std::vector<bool> reached;        // per foot
  std::vector<double> error;        // per foot, m
  std::vector<int> iterations;
};

/// Damped least-squares IK per leg with the base at the origin and identity
/// orientation; targets are foot positions in that base frame. `seed` is the
/// starting joint vector (n_va).
IkResult inverse_kinematics(const model::RobotModel& model,
                            const std::vector<Eigen::Vector3d>& foot_targets,
                            const Eigen::VectorXd& seed, int max_iterations = 50,
                            double tolerance = 1e-6);

struct PdGains {
  double kp = 60.0;
  double kd = 2.0;
};

/// Kp (q_des - q) + Kd (qd_des - qd), clipped to +-tau_max.
Eigen::VectorXd nominal_torque(const model::RobotModel& model, const model::RobotState& state,
                               const Eigen::VectorXd& q_des, const Eigen::VectorXd& qd_des,
                               const PdGains& gains);

struct TrotConfig {
  GaitSchedule schedule;
  PdGains gains;
  double stand_thigh = 0.8;
  double stand_calf = -1.6;
  /// Outward lateral foot offset reached at the end of each stance, m. The
  /// stance pair squeezes the ground apart until it slips, so the joint
  /// signals carry friction information. Zero gives a plain trot.
  double stance_splay = 0.0;
};

struct NominalCommand {
  Eigen::VectorXd u;
  Eigen::VectorXd q_des;
  Eigen::VectorXd qd_des;
  model::ContactSet contacts;
  std::vector<Eigen::Vector3d> foot_targets;  // base frame
  bool ik_ok = true;
};

/// Open-loop trot: base-frame foot targets from the schedule, IK, then PD.
class TrotController {
 public:
  TrotController(const model::RobotModel& model, TrotConfig config);

  NominalCommand command(const model::RobotState& state) const;

  const TrotConfig& config() const { return config_; }
  /// Joint angles of the standing posture (n_va).
  const Eigen::VectorXd& standing_joints() const { return stand_q_; }
  /// Base-frame foot positions in the standing posture.
  const std::vector<Eigen::Vector3d>& nominal_feet() const { return nominal_feet_; }
  /// Base height at which the standing feet touch z = 0.
  double standing_height() const { return stand_height_; }
  /// Standing state with feet on z = `ground`.
  model::RobotState standing_state(double ground = 0.0) const;

 private:
  const model::RobotModel* model_;
  TrotConfig config_;
  Eigen::VectorXd stand_q_;
  std::vector<Eigen::Vector3d> nominal_feet_;
  double stand_height_ = 0.0;
};

}  // namespace legsafe::gait

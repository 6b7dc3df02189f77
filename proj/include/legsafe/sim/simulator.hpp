#pragma once

#include "legsafe/model/dynamics.hpp"
#include "legsafe/model/robot_model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace legsafe::sim {

enum class TerrainType { kFlat, kWaves };

/// Ground surface with a uniform friction coefficient. kWaves is
/// offset + amplitude sin(2 pi x / wavelength) sin(2 pi y / wavelength).
struct Terrain {
  double mu_true = 0.8;
  TerrainType type = TerrainType::kFlat;
  double offset = 0.0;
  double amplitude = 0.0;
  double wavelength = 1.0;

  void validate() const;
  double height(double x, double y) const;
  Eigen::Vector3d normal(double x, double y) const;
};

struct SimConfig {
  double dt = 1e-3;
  double stiffness = 3e4;
  double damping = 1e3;
  /// Penetration over which the damping term ramps in, m.
  double damping_depth = 1e-3;
  /// Tangential speed below which friction is regularized, m/s.
  double v_eps = 1e-4;
  double duration = 6.0;
  std::uint64_t seed = 1;
  Eigen::Vector3d gravity = model::kDefaultGravity;

  void validate() const;
};

/// Compliant contact force on one foot point, world frame, with its
/// derivatives with respect to the foot velocity and position.
struct FootContact {
  Eigen::Vector3d force = Eigen::Vector3d::Zero();
  Eigen::Matrix3d d_velocity = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d d_position = Eigen::Matrix3d::Zero();
  double penetration = 0.0;
};

FootContact foot_contact(const Eigen::Vector3d& position, const Eigen::Vector3d& velocity,
                         const Terrain& terrain, const SimConfig& config);

/// One world force per model foot.
std::vector<Eigen::Vector3d> contact_forces(const model::RobotModel& model,
                                            const model::RobotState& state, const Terrain& terrain,
                                            const SimConfig& config);

/// One simulation step of length config.dt. Contact forces are linearized
/// about the current state and integrated implicitly in the velocity update;
/// the configuration then follows with the new velocity. The effective foot
/// forces acting over the step are written to `applied` when non-null.
model::RobotState step(const model::RobotModel& model, const model::RobotState& state,
                       const Eigen::VectorXd& u, const Terrain& terrain, const SimConfig& config,
                       std::vector<Eigen::Vector3d>* applied = nullptr);

/// Sum of vertical ground forces over all feet.
double total_vertical_force(const std::vector<Eigen::Vector3d>& forces);

}  // namespace legsafe::sim

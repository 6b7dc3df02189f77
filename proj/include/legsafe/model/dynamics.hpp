#pragma once

#include "legsafe/model/robot_model.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace legsafe::model {

inline const Eigen::Vector3d kDefaultGravity{0.0, 0.0, -9.81};

/// Per-body kinematic quantities for one (q, v). Computing it once and
/// passing it to the overloads below avoids repeating the forward pass when
/// several quantities are needed at the same state.
struct Kinematics {
  std::vector<Eigen::Matrix3d> rotation;      // body -> world
  std::vector<Eigen::Vector3d> position;      // body origin, world
  std::vector<Eigen::Matrix<double, 6, 6>> x_up;  // parent -> body motion transform
  std::vector<Eigen::Matrix<double, 6, 1>> velocity;  // [omega; v], body frame
  std::vector<Eigen::Matrix<double, 6, 1>> velocity_product;  // v_i x (S_i qdot_i)
  std::vector<Eigen::Matrix<double, 6, 1>> bias_acc;  // acceleration with vdot = 0, no gravity
};

Kinematics compute_kinematics(const RobotModel& model, const RobotState& state);

Eigen::MatrixXd mass_matrix(const RobotModel& model, const RobotState& state);
Eigen::MatrixXd mass_matrix(const RobotModel& model, const Kinematics& kin);

/// H(q, v): Coriolis, centrifugal and gravity terms (RNEA with vdot = 0).
Eigen::VectorXd nonlinear_effects(const RobotModel& model, const RobotState& state,
                                  const Eigen::Vector3d& gravity = kDefaultGravity);
Eigen::VectorXd nonlinear_effects(const RobotModel& model, const Kinematics& kin,
                                  const Eigen::Vector3d& gravity = kDefaultGravity);

/// M(q) vdot + H(q, v).
Eigen::VectorXd inverse_dynamics(const RobotModel& model, const RobotState& state,
                                 const Eigen::VectorXd& vdot,
                                 const Eigen::Vector3d& gravity = kDefaultGravity);

Eigen::Vector3d foot_position(const RobotModel& model, const RobotState& state, int foot);
Eigen::Vector3d foot_position(const RobotModel& model, const Kinematics& kin, int foot);
Eigen::Vector3d foot_velocity(const RobotModel& model, const RobotState& state, int foot);
Eigen::Vector3d foot_velocity(const RobotModel& model, const Kinematics& kin, int foot);

/// 3 x nv translational Jacobian of one foot point, world frame.
Eigen::MatrixXd foot_jacobian(const RobotModel& model, const Kinematics& kin, int foot);

/// Stacked foot Jacobians (3 n_c x nv) in ContactSet order.
Eigen::MatrixXd contact_jacobian(const RobotModel& model, const RobotState& state,
                                 const ContactSet& contacts);
Eigen::MatrixXd contact_jacobian(const RobotModel& model, const Kinematics& kin,
                                 const ContactSet& contacts);

/// Jdot(q, v) v of one foot point: its classical acceleration when vdot = 0.
Eigen::Vector3d foot_jacobian_dot_v(const RobotModel& model, const Kinematics& kin, int foot);

/// Stacked Jdot_c v (3 n_c) in ContactSet order.
Eigen::VectorXd jacobian_dot_v(const RobotModel& model, const RobotState& state,
                               const ContactSet& contacts);
Eigen::VectorXd jacobian_dot_v(const RobotModel& model, const Kinematics& kin,
                               const ContactSet& contacts);

/// vdot = M^-1 (B u + sum_feet J_f^T f - H). `foot_forces` holds one world
/// force per model foot (empty means no external force).
Eigen::VectorXd forward_dynamics(const RobotModel& model, const RobotState& state,
                                 const Eigen::VectorXd& u,
                                 std::span<const Eigen::Vector3d> foot_forces = {},
                                 const Eigen::Vector3d& gravity = kDefaultGravity);

/// q (+) v dt on the configuration manifold: positions move by the world
/// frame base velocity, orientation by the quaternion exponential of the
/// body angular velocity. The quaternion is renormalized.
Eigen::VectorXd integrate_configuration(const RobotModel& model, const Eigen::VectorXd& q,
                                        const Eigen::VectorXd& v, double dt);

/// Semi-implicit Euler: v += vdot dt, then q = q (+) v dt; t advances by dt.
RobotState integrate(const RobotModel& model, const RobotState& state,
                     const Eigen::VectorXd& vdot, double dt);

double kinetic_energy(const RobotModel& model, const RobotState& state);
double potential_energy(const RobotModel& model, const RobotState& state,
                        const Eigen::Vector3d& gravity = kDefaultGravity);

Eigen::Vector3d center_of_mass(const RobotModel& model, const RobotState& state);

/// World orientation of the floating base (identity for a fixed base).
Eigen::Quaterniond base_orientation(const RobotModel& model, const Eigen::VectorXd& q);

}  // namespace legsafe::model

#pragma once

#include "legsafe/model/dynamics.hpp"
#include "legsafe/model/model_io.hpp"

#include <Eigen/Dense>

#include <random>
#include <string>

namespace legsafe::testing {

inline std::string quadruped_path() { return std::string(LEGSAFE_MODEL_DIR) + "/quadruped_approx.yaml"; }

inline const model::RobotModel& quadruped() {
  static const model::RobotModel m = model::load_model(quadruped_path());
  return m;
}

/// Planar chain of rods swinging about y, hanging along -z at q = 0.
/// Link i has length lengths[i], COM at the rod midpoint, and inertia
/// `inertia_y` about its COM for the swing axis.
inline std::string planar_chain_yaml(double m1, double l1, double i1, double m2, double l2,
                                     double i2, bool actuated) {
  auto num = [](double x) { return std::to_string(x); };
  const std::string act = actuated ? "true, torque_limit: 100.0" : "false";
  return "name: chain\nbase: fixed\nlinks:\n"
         "  - {name: l1, mass: " + num(m1) + ", com: [0, 0, " + num(-l1 / 2) +
         "], inertia: [" + num(i1) + ", " + num(i1) + ", " + num(i1) + ", 0, 0, 0]}\n"
         "  - {name: l2, mass: " + num(m2) + ", com: [0, 0, " + num(-l2 / 2) +
         "], inertia: [" + num(i2) + ", " + num(i2) + ", " + num(i2) + ", 0, 0, 0]}\n"
         "  - {name: anchor, mass: 1.0, inertia: [1, 1, 1, 0, 0, 0]}\n"
         "joints:\n"
         "  - {name: j1, type: revolute, parent: anchor, child: l1, axis: [0, 1, 0], actuated: " + act + "}\n"
         "  - {name: j2, type: revolute, parent: l1, child: l2, axis: [0, 1, 0], origin: {xyz: [0, 0, " +
         num(-l1) + "]}, actuated: " + act + "}\n"
         "feet:\n"
         "  - {name: tip, link: l2, offset: [0, 0, " + num(-l2) + "]}\n";
}

/// Random valid state: unit quaternion, joint angles in [-1, 1], velocities in
/// [-scale, scale].
inline model::RobotState random_state(const model::RobotModel& m, std::mt19937_64& rng,
                                      double scale = 1.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  model::RobotState s = model::neutral_state(m);
  for (int i = 0; i < m.nq(); ++i) s.q[i] = u(rng);
  if (m.floating_base()) {
    s.q.segment<3>(0) *= 0.5;
    Eigen::Vector4d quat(u(rng), u(rng), u(rng), u(rng));
    s.q.segment<4>(3) = quat.normalized();
  }
  for (int i = 0; i < m.nv(); ++i) s.v[i] = scale * u(rng);
  return s;
}

inline Eigen::VectorXd random_vector(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = u(rng);
  return x;
}

/// Standing posture of the reference quadruped: thigh 0.8 rad, calf -1.6 rad,
/// base height chosen so the feet touch z = 0.
inline model::RobotState quadruped_standing() {
  const auto& m = quadruped();
  model::RobotState s = model::neutral_state(m);
  for (int leg = 0; leg < 4; ++leg) {
    s.q[7 + 3 * leg + 1] = 0.8;
    s.q[7 + 3 * leg + 2] = -1.6;
  }
  const double foot_z = model::foot_position(m, s, 0).z();
  s.q[2] = -foot_z;
  return s;
}

}  // namespace legsafe::testing

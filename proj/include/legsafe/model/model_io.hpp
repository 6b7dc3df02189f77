#pragma once

#include "legsafe/model/robot_model.hpp"

#include <filesystem>
#include <string>

namespace legsafe::model {

/// Parse failure carrying the 1-based line of the offending entry (0 when
/// the error is not tied to one line).
class ModelParseError : public ModelError {
 public:
  ModelParseError(const std::string& message, int line);
  int line() const { return line_; }

 private:
  int line_;
};

/// Robot description in YAML:
///
///   name: my_robot
///   base: floating            # or fixed
///   links:
///     - {name: trunk, mass: 4.5, com: [0, 0, 0],
///        inertia: [ixx, iyy, izz, ixy, ixz, iyz]}
///   joints:
///     - {name: hip, type: revolute, parent: trunk, child: thigh,
///        axis: [1, 0, 0], origin: {xyz: [...], rpy: [...]},
///        actuated: true, torque_limit: 33.5}
///   feet:
///     - {name: FR, link: calf, offset: [0, 0, -0.2]}
///
/// The root link is the one link that is no joint's child; the base joint
/// attaching it to the world is implicit.
RobotModel parse_model(const std::string& text);
RobotModel load_model(const std::filesystem::path& path);

}  // namespace legsafe::model

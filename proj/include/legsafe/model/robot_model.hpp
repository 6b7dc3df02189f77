#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace legsafe::model {

/// Thrown when a state, contact set or command does not fit the model it is
/// evaluated against.
class ModelMismatchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown for structurally invalid models (non-tree topology, non-positive
/// masses, indefinite inertias, missing torque limits).
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class JointType { kFloatingBase, kFixedBase, kRevolute, kPrismatic };

struct Link {
  std::string name;
  double mass = 0.0;
  Eigen::Matrix3d inertia = Eigen::Matrix3d::Zero();  // about the COM, link frame
  Eigen::Vector3d com = Eigen::Vector3d::Zero();      // link frame
};

/// Throws ModelError unless mass > 0 and the inertia is symmetric positive
/// definite.
void validate_link(const Link& link);

/// A joint connects `parent` to `child` (link indices). The root joint has
/// parent -1 and is either a floating base or a fixed weld to the world.
/// `placement` is the pose of the joint frame in the parent link frame.
struct Joint {
  std::string name;
  JointType type = JointType::kRevolute;
  int parent = -1;
  int child = -1;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  Eigen::Isometry3d placement = Eigen::Isometry3d::Identity();
  bool actuated = false;
  double torque_limit = 0.0;
};

struct Foot {
  std::string name;
  int link = -1;
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();
};

/// Immutable kinematic tree. Bodies are stored in topological order: body i
/// is link i after depth-first reordering, joint i is the joint whose child is body i.
///
/// Configuration layout for a floating base:
///   q = [p_world(3), quat(x, y, z, w)(4), joint coordinates...]
///   v = [linear velocity (base frame)(3), angular velocity (base frame)(3),
///        joint rates...]
/// A fixed base contributes nothing to q or v.
class RobotModel {
 public:
  RobotModel(std::string name, std::vector<Link> links, std::vector<Joint> joints,
             std::vector<Foot> feet);

  const std::string& name() const { return name_; }
  const std::vector<Link>& links() const { return links_; }
  const std::vector<Joint>& joints() const { return joints_; }
  const std::vector<Foot>& feet() const { return feet_; }

  std::size_t num_bodies() const { return links_.size(); }
  int nq() const { return nq_; }
  int nv() const { return nv_; }
  /// Unactuated velocity dimension (6 for a floating base plus passive joints).
  int nvu() const { return nv_ - nva_; }
  int nva() const { return nva_; }
  int num_feet() const { return static_cast<int>(feet_.size()); }
  bool floating_base() const { return joints_.front().type == JointType::kFloatingBase; }

  int q_index(std::size_t body) const { return q_idx_[body]; }
  int v_index(std::size_t body) const { return v_idx_[body]; }
  int joint_nv(std::size_t body) const;
  int parent(std::size_t body) const { return joints_[body].parent; }

  /// Column of the actuated-torque vector for body's joint, or -1.
  int actuator_index(std::size_t body) const { return act_idx_[body]; }
  /// Velocity index of each actuated joint, in actuator order.
  const std::vector<int>& actuated_v_indices() const { return actuated_v_; }
  const Eigen::VectorXd& torque_limits() const { return torque_limits_; }

  /// Selection matrix B (nv x nva) mapping actuator torques to generalized forces.
  Eigen::MatrixXd selection_matrix() const;

  double total_mass() const;
  std::optional<std::size_t> find_link(const std::string& name) const;
  std::optional<std::size_t> find_foot(const std::string& name) const;

 private:
  std::string name_;
  std::vector<Link> links_;
  std::vector<Joint> joints_;
  std::vector<Foot> feet_;
  std::vector<int> q_idx_;
  std::vector<int> v_idx_;
  std::vector<int> act_idx_;
  std::vector<int> actuated_v_;
  Eigen::VectorXd torque_limits_;
  int nq_ = 0;
  int nv_ = 0;
  int nva_ = 0;
};

struct RobotState {
  Eigen::VectorXd q;
  Eigen::VectorXd v;
  double t = 0.0;
};

/// Neutral configuration: base at the origin with identity orientation and
/// all joint coordinates zero; zero velocity.
RobotState neutral_state(const RobotModel& model);

/// Throws ModelMismatchError when dimensions disagree or the base quaternion
/// is not unit within 1e-9.
void validate_state(const RobotModel& model, const RobotState& state);

/// Feet currently in stance, kept in ascending model foot order. Contact
/// frames are world aligned with z along the ground normal.
class ContactSet {
 public:
  ContactSet() = default;
  explicit ContactSet(std::vector<int> feet);

  static ContactSet all(const RobotModel& model);

  const std::vector<int>& feet() const { return feet_; }
  int size() const { return static_cast<int>(feet_.size()); }
  bool empty() const { return feet_.empty(); }
  bool contains(int foot) const;

  bool operator==(const ContactSet&) const = default;

 private:
  std::vector<int> feet_;
};

}  // namespace legsafe::model

#include "legsafe/model/robot_model.hpp"

#include <algorithm>
#include <cmath>

namespace legsafe::model {

namespace {

bool is_root_type(JointType t) {
  return t == JointType::kFloatingBase || t == JointType::kFixedBase;
}

int type_nv(JointType t) {
  switch (t) {
    case JointType::kFloatingBase: return 6;
    case JointType::kFixedBase: return 0;
    case JointType::kRevolute:
    case JointType::kPrismatic: return 1;
  }
  return 0;
}

int type_nq(JointType t) { return t == JointType::kFloatingBase ? 7 : type_nv(t); }

}  // namespace

void validate_link(const Link& link) {
  if (!(link.mass > 0.0) || !std::isfinite(link.mass)) {
    throw ModelError("link '" + link.name + "': mass must be positive");
  }
  const Eigen::Matrix3d& I = link.inertia;
  const double scale = std::max(1.0, I.cwiseAbs().maxCoeff());
  if ((I - I.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ModelError("link '" + link.name + "': inertia tensor is not symmetric");
  }
  Eigen::LLT<Eigen::Matrix3d> llt(I);
  if (llt.info() != Eigen::Success || llt.matrixL().toDenseMatrix().diagonal().minCoeff() <= 0.0) {
    throw ModelError("link '" + link.name + "': inertia tensor is not positive definite");
  }
}

RobotModel::RobotModel(std::string name, std::vector<Link> links, std::vector<Joint> joints,
                       std::vector<Foot> feet)
    : name_(std::move(name)) {
  const int n = static_cast<int>(links.size());
  if (n == 0) throw ModelError("model has no links");
  if (joints.size() != links.size()) {
    throw ModelError("a kinematic tree needs exactly one joint per link (" +
                     std::to_string(links.size()) + " links, " +
                     std::to_string(joints.size()) + " joints)");
  }
  for (const auto& l : links) validate_link(l);

  // Each link must be the child of exactly one joint.
  std::vector<int> joint_of_child(n, -1);
  int root_joint = -1;
  for (int j = 0; j < n; ++j) {
    const Joint& jt = joints[j];
    if (jt.child < 0 || jt.child >= n) {
      throw ModelError("joint '" + jt.name + "': child index out of range");
    }
    if (joint_of_child[jt.child] != -1) {
      throw ModelError("link '" + links[jt.child].name + "' has more than one parent joint");
    }
    joint_of_child[jt.child] = j;
    if (jt.parent < 0) {
      if (!is_root_type(jt.type)) {
        throw ModelError("joint '" + jt.name + "': only the root joint may attach to the world");
      }
      if (root_joint != -1) throw ModelError("model has more than one root");
      root_joint = j;
    } else {
      if (is_root_type(jt.type)) {
        throw ModelError("joint '" + jt.name + "': base joints must attach to the world");
      }
      if (jt.parent >= n) throw ModelError("joint '" + jt.name + "': parent index out of range");
      if (jt.parent == jt.child) throw ModelError("joint '" + jt.name + "' connects a link to itself");
    }
  }
  if (root_joint == -1) throw ModelError("model has no root joint");

  // Depth-first preorder from the root, children in declaration order, so each
  // branch occupies a contiguous index range. Anything unreached sits on a cycle.
  std::vector<std::vector<int>> children(n);
  for (int j = 0; j < n; ++j) {
    if (joints[j].parent >= 0) children[joints[j].parent].push_back(joints[j].child);
  }
  std::vector<int> order;
  std::vector<int> frontier{joints[root_joint].child};
  while (!frontier.empty()) {
    const int l = frontier.back();
    frontier.pop_back();
    order.push_back(l);
    for (auto it = children[l].rbegin(); it != children[l].rend(); ++it) frontier.push_back(*it);
  }
  if (static_cast<int>(order.size()) != n) {
    throw ModelError("model topology is not a tree (cycle detected)");
  }
  std::vector<int> new_index(n);
  for (int i = 0; i < n; ++i) new_index[order[i]] = i;

  links_.reserve(n);
  joints_.reserve(n);
  for (int i = 0; i < n; ++i) {
    links_.push_back(links[order[i]]);
    Joint jt = joints[joint_of_child[order[i]]];
    jt.child = i;
    jt.parent = jt.parent < 0 ? -1 : new_index[jt.parent];
    if (jt.type == JointType::kRevolute || jt.type == JointType::kPrismatic) {
      const double norm = jt.axis.norm();
      if (!(norm > 1e-12)) throw ModelError("joint '" + jt.name + "': zero axis");
      jt.axis /= norm;
    }
    if (jt.actuated) {
      if (is_root_type(jt.type)) {
        throw ModelError("joint '" + jt.name + "': base joints cannot be actuated");
      }
      if (!(jt.torque_limit > 0.0)) {
        throw ModelError("joint '" + jt.name + "': torque limit must be positive");
      }
    }
    joints_.push_back(std::move(jt));
  }

  q_idx_.resize(n);
  v_idx_.resize(n);
  act_idx_.assign(n, -1);
  std::vector<double> limits;
  for (int i = 0; i < n; ++i) {
    q_idx_[i] = nq_;
    v_idx_[i] = nv_;
    nq_ += type_nq(joints_[i].type);
    nv_ += type_nv(joints_[i].type);
    if (joints_[i].actuated) {
      act_idx_[i] = nva_++;
      actuated_v_.push_back(v_idx_[i]);
      limits.push_back(joints_[i].torque_limit);
    }
  }
  torque_limits_ = Eigen::Map<Eigen::VectorXd>(limits.data(), static_cast<Eigen::Index>(limits.size()));

  feet_ = std::move(feet);
  for (auto& f : feet_) {
    if (f.link < 0 || f.link >= n) throw ModelError("foot '" + f.name + "': link index out of range");
    f.link = new_index[f.link];
  }
}

int RobotModel::joint_nv(std::size_t body) const { return type_nv(joints_[body].type); }

Eigen::MatrixXd RobotModel::selection_matrix() const {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(nv_, nva_);
  for (int a = 0; a < nva_; ++a) B(actuated_v_[a], a) = 1.0;
  return B;
}

double RobotModel::total_mass() const {
  double m = 0.0;
  for (const auto& l : links_) m += l.mass;
  return m;
}

std::optional<std::size_t> RobotModel::find_link(const std::string& name) const {
  for (std::size_t i = 0; i < links_.size(); ++i) {
    if (links_[i].name == name) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> RobotModel::find_foot(const std::string& name) const {
  for (std::size_t i = 0; i < feet_.size(); ++i) {
    if (feet_[i].name == name) return i;
  }
  return std::nullopt;
}

RobotState neutral_state(const RobotModel& model) {
  RobotState s;
  s.q = Eigen::VectorXd::Zero(model.nq());
  s.v = Eigen::VectorXd::Zero(model.nv());
  if (model.floating_base()) s.q[6] = 1.0;
  return s;
}

void validate_state(const RobotModel& model, const RobotState& state) {
  if (state.q.size() != model.nq() || state.v.size() != model.nv()) {
    throw ModelMismatchError("state dimensions (nq=" + std::to_string(state.q.size()) +
                             ", nv=" + std::to_string(state.v.size()) + ") do not match model '" +
                             model.name() + "' (nq=" + std::to_string(model.nq()) +
                             ", nv=" + std::to_string(model.nv()) + ")");
  }
  if (model.floating_base()) {
    const double norm = state.q.segment<4>(3).norm();
    if (std::abs(norm - 1.0) > 1e-9) {
      throw ModelMismatchError("base quaternion is not unit (norm " + std::to_string(norm) + ")");
    }
  }
}

ContactSet::ContactSet(std::vector<int> feet) : feet_(std::move(feet)) {
  std::sort(feet_.begin(), feet_.end());
  feet_.erase(std::unique(feet_.begin(), feet_.end()), feet_.end());
}

ContactSet ContactSet::all(const RobotModel& model) {
  std::vector<int> f(model.num_feet());
  for (int i = 0; i < model.num_feet(); ++i) f[i] = i;
  return ContactSet(std::move(f));
}

bool ContactSet::contains(int foot) const {
  return std::binary_search(feet_.begin(), feet_.end(), foot);
}

}  // namespace legsafe::model

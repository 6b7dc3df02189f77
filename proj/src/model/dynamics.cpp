#include "legsafe/model/dynamics.hpp"

#include "spatial.hpp"

#include <cmath>
#include <stdexcept>

namespace legsafe::model {

using spatial::Mat6;
using spatial::Vec6;

namespace {

using MotionSubspace = Eigen::Matrix<double, 6, Eigen::Dynamic, 0, 6, 6>;

MotionSubspace motion_subspace(const Joint& joint) {
  switch (joint.type) {
    case JointType::kFloatingBase: {
      // v = [linear; angular] maps onto [angular; linear].
      MotionSubspace S = MotionSubspace::Zero(6, 6);
      S.block<3, 3>(0, 3).setIdentity();
      S.block<3, 3>(3, 0).setIdentity();
      return S;
    }
    case JointType::kFixedBase:
      return MotionSubspace::Zero(6, 0);
    case JointType::kRevolute: {
      MotionSubspace S = MotionSubspace::Zero(6, 1);
      S.block<3, 1>(0, 0) = joint.axis;
      return S;
    }
    case JointType::kPrismatic: {
      MotionSubspace S = MotionSubspace::Zero(6, 1);
      S.block<3, 1>(3, 0) = joint.axis;
      return S;
    }
  }
  return MotionSubspace::Zero(6, 0);
}

Eigen::Quaterniond quat_from_q(const Eigen::VectorXd& q, int idx) {
  return Eigen::Quaterniond(q[idx + 6], q[idx + 3], q[idx + 4], q[idx + 5]);
}

// Pose of the child frame in the parent frame for the current joint coordinate.
void joint_pose(const Joint& joint, const Eigen::VectorXd& q, int qi, Eigen::Matrix3d& R,
                Eigen::Vector3d& p) {
  const Eigen::Matrix3d Rp = joint.placement.linear();
  const Eigen::Vector3d pp = joint.placement.translation();
  switch (joint.type) {
    case JointType::kFloatingBase:
      R = quat_from_q(q, qi).normalized().toRotationMatrix();
      p = q.segment<3>(qi);
      return;
    case JointType::kFixedBase:
      R = Rp;
      p = pp;
      return;
    case JointType::kRevolute:
      R = Rp * Eigen::AngleAxisd(q[qi], joint.axis).toRotationMatrix();
      p = pp;
      return;
    case JointType::kPrismatic:
      R = Rp;
      p = pp + Rp * joint.axis * q[qi];
      return;
  }
}

Mat6 link_inertia(const Link& link) {
  return spatial::rigid_body_inertia(link.mass, link.com, link.inertia);
}

void check_foot(const RobotModel& model, int foot) {
  if (foot < 0 || foot >= model.num_feet()) {
    throw ModelMismatchError("foot index " + std::to_string(foot) + " out of range for model '" +
                             model.name() + "' with " + std::to_string(model.num_feet()) +
                             " feet");
  }
}

void check_contacts(const RobotModel& model, const ContactSet& contacts) {
  for (int f : contacts.feet()) check_foot(model, f);
}

// RNEA with the given generalized acceleration; gravity enters as a fictitious
// upward acceleration of the world.
Eigen::VectorXd rnea(const RobotModel& model, const Kinematics& kin, const Eigen::VectorXd* vdot,
                     const Eigen::Vector3d& gravity) {
  const std::size_t n = model.num_bodies();
  std::vector<Vec6> acc(n);
  std::vector<Vec6> force(n);
  Vec6 world_acc = Vec6::Zero();
  world_acc.tail<3>() = -gravity;
  for (std::size_t i = 0; i < n; ++i) {
    const Joint& jt = model.joints()[i];
    const Vec6& a_parent = jt.parent < 0 ? world_acc : acc[jt.parent];
    Vec6 a = kin.x_up[i] * a_parent + kin.velocity_product[i];
    const int nvj = model.joint_nv(i);
    if (vdot != nullptr && nvj > 0) {
      a += motion_subspace(jt) * vdot->segment(model.v_index(i), nvj);
    }
    acc[i] = a;
    const Mat6 I = link_inertia(model.links()[i]);
    force[i] = I * a + spatial::cross_force(kin.velocity[i], I * kin.velocity[i]);
  }
  Eigen::VectorXd tau = Eigen::VectorXd::Zero(model.nv());
  for (std::size_t k = n; k-- > 0;) {
    const Joint& jt = model.joints()[k];
    const int nvj = model.joint_nv(k);
    if (nvj > 0) tau.segment(model.v_index(k), nvj) = motion_subspace(jt).transpose() * force[k];
    if (jt.parent >= 0) force[jt.parent] += kin.x_up[k].transpose() * force[k];
  }
  return tau;
}

}  // namespace

Kinematics compute_kinematics(const RobotModel& model, const RobotState& state) {
  validate_state(model, state);
  const std::size_t n = model.num_bodies();
  Kinematics kin;
  kin.rotation.resize(n);
  kin.position.resize(n);
  kin.x_up.resize(n);
  kin.velocity.resize(n);
  kin.velocity_product.resize(n);
  kin.bias_acc.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Joint& jt = model.joints()[i];
    Eigen::Matrix3d R;
    Eigen::Vector3d p;
    joint_pose(jt, state.q, model.q_index(i), R, p);
    kin.x_up[i] = spatial::motion_transform(R.transpose(), p);

    Vec6 vj = Vec6::Zero();
    const int nvj = model.joint_nv(i);
    if (nvj > 0) vj = motion_subspace(jt) * state.v.segment(model.v_index(i), nvj);

    if (jt.parent < 0) {
      kin.rotation[i] = R;
      kin.position[i] = p;
      kin.velocity[i] = vj;
      kin.velocity_product[i] = Vec6::Zero();
      kin.bias_acc[i] = Vec6::Zero();
    } else {
      const int par = jt.parent;
      kin.rotation[i] = kin.rotation[par] * R;
      kin.position[i] = kin.position[par] + kin.rotation[par] * p;
      kin.velocity[i] = kin.x_up[i] * kin.velocity[par] + vj;
      kin.velocity_product[i] = spatial::cross_motion(kin.velocity[i], vj);
      kin.bias_acc[i] = kin.x_up[i] * kin.bias_acc[par] + kin.velocity_product[i];
    }
  }
  return kin;
}

Eigen::MatrixXd mass_matrix(const RobotModel& model, const RobotState& state) {
  return mass_matrix(model, compute_kinematics(model, state));
}

Eigen::MatrixXd mass_matrix(const RobotModel& model, const Kinematics& kin) {
  const std::size_t n = model.num_bodies();
  std::vector<Mat6> composite(n);
  for (std::size_t i = 0; i < n; ++i) composite[i] = link_inertia(model.links()[i]);
  for (std::size_t k = n; k-- > 0;) {
    const int par = model.parent(k);
    if (par >= 0) composite[par] += kin.x_up[k].transpose() * composite[k] * kin.x_up[k];
  }

  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(model.nv(), model.nv());
  for (std::size_t i = 0; i < n; ++i) {
    const int nvi = model.joint_nv(i);
    if (nvi == 0) continue;
    const MotionSubspace Si = motion_subspace(model.joints()[i]);
    const int vi = model.v_index(i);
    Eigen::Matrix<double, 6, Eigen::Dynamic, 0, 6, 6> F = composite[i] * Si;
    M.block(vi, vi, nvi, nvi) = Si.transpose() * F;
    std::size_t j = i;
    while (model.parent(j) >= 0) {
      F = kin.x_up[j].transpose() * F;
      j = static_cast<std::size_t>(model.parent(j));
      const int nvj = model.joint_nv(j);
      if (nvj == 0) continue;
      const int vj = model.v_index(j);
      M.block(vi, vj, nvi, nvj) = F.transpose() * motion_subspace(model.joints()[j]);
      M.block(vj, vi, nvj, nvi) = M.block(vi, vj, nvi, nvj).transpose();
    }
  }
  return 0.5 * (M + M.transpose());
}

Eigen::VectorXd nonlinear_effects(const RobotModel& model, const RobotState& state,
                                  const Eigen::Vector3d& gravity) {
  return rnea(model, compute_kinematics(model, state), nullptr, gravity);
}

Eigen::VectorXd nonlinear_effects(const RobotModel& model, const Kinematics& kin,
                                  const Eigen::Vector3d& gravity) {
  return rnea(model, kin, nullptr, gravity);
}

Eigen::VectorXd inverse_dynamics(const RobotModel& model, const RobotState& state,
                                 const Eigen::VectorXd& vdot, const Eigen::Vector3d& gravity) {
  if (vdot.size() != model.nv()) throw ModelMismatchError("vdot has wrong dimension");
  return rnea(model, compute_kinematics(model, state), &vdot, gravity);
}

Eigen::Vector3d foot_position(const RobotModel& model, const RobotState& state, int foot) {
  check_foot(model, foot);
  return foot_position(model, compute_kinematics(model, state), foot);
}

Eigen::Vector3d foot_position(const RobotModel& model, const Kinematics& kin, int foot) {
  check_foot(model, foot);
  const Foot& f = model.feet()[foot];
  return kin.position[f.link] + kin.rotation[f.link] * f.offset;
}

Eigen::Vector3d foot_velocity(const RobotModel& model, const RobotState& state, int foot) {
  check_foot(model, foot);
  return foot_velocity(model, compute_kinematics(model, state), foot);
}

Eigen::Vector3d foot_velocity(const RobotModel& model, const Kinematics& kin, int foot) {
  check_foot(model, foot);
  const Foot& f = model.feet()[foot];
  const Vec6& v = kin.velocity[f.link];
  const Eigen::Vector3d w = v.head<3>();
  return kin.rotation[f.link] * (v.tail<3>() + w.cross(f.offset));
}

Eigen::MatrixXd foot_jacobian(const RobotModel& model, const Kinematics& kin, int foot) {
  check_foot(model, foot);
  const Foot& f = model.feet()[foot];
  const Eigen::Vector3d p_foot = foot_position(model, kin, foot);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(3, model.nv());
  for (int j = f.link; j >= 0; j = model.parent(j)) {
    const int nvj = model.joint_nv(j);
    if (nvj == 0) continue;
    const MotionSubspace S = motion_subspace(model.joints()[j]);
    const Eigen::Matrix3d& R = kin.rotation[j];
    const Eigen::Vector3d lever = p_foot - kin.position[j];
    for (int c = 0; c < nvj; ++c) {
      const Eigen::Vector3d w = R * S.block<3, 1>(0, c);
      J.col(model.v_index(j) + c) = R * S.block<3, 1>(3, c) + w.cross(lever);
    }
  }
  return J;
}

Eigen::MatrixXd contact_jacobian(const RobotModel& model, const RobotState& state,
                                 const ContactSet& contacts) {
  check_contacts(model, contacts);
  return contact_jacobian(model, compute_kinematics(model, state), contacts);
}

Eigen::MatrixXd contact_jacobian(const RobotModel& model, const Kinematics& kin,
                                 const ContactSet& contacts) {
  check_contacts(model, contacts);
  Eigen::MatrixXd J(3 * contacts.size(), model.nv());
  for (int k = 0; k < contacts.size(); ++k) {
    J.middleRows<3>(3 * k) = foot_jacobian(model, kin, contacts.feet()[k]);
  }
  return J;
}

Eigen::Vector3d foot_jacobian_dot_v(const RobotModel& model, const Kinematics& kin, int foot) {
  check_foot(model, foot);
  const Foot& f = model.feet()[foot];
  const Vec6& v = kin.velocity[f.link];
  const Vec6& a = kin.bias_acc[f.link];
  const Eigen::Vector3d w = v.head<3>();
  const Eigen::Vector3d v_point = v.tail<3>() + w.cross(f.offset);
  const Eigen::Vector3d a_point = a.tail<3>() + a.head<3>().cross(f.offset) + w.cross(v_point);
  return kin.rotation[f.link] * a_point;
}

Eigen::VectorXd jacobian_dot_v(const RobotModel& model, const RobotState& state,
                               const ContactSet& contacts) {
  check_contacts(model, contacts);
  return jacobian_dot_v(model, compute_kinematics(model, state), contacts);
}

Eigen::VectorXd jacobian_dot_v(const RobotModel& model, const Kinematics& kin,
                               const ContactSet& contacts) {
  check_contacts(model, contacts);
  Eigen::VectorXd out(3 * contacts.size());
  for (int k = 0; k < contacts.size(); ++k) {
    out.segment<3>(3 * k) = foot_jacobian_dot_v(model, kin, contacts.feet()[k]);
  }
  return out;
}

Eigen::VectorXd forward_dynamics(const RobotModel& model, const RobotState& state,
                                 const Eigen::VectorXd& u,
                                 std::span<const Eigen::Vector3d> foot_forces,
                                 const Eigen::Vector3d& gravity) {
  if (u.size() != model.nva()) {
    throw ModelMismatchError("torque vector has " + std::to_string(u.size()) +
                             " entries, model has " + std::to_string(model.nva()) + " actuators");
  }
  if (!foot_forces.empty() && static_cast<int>(foot_forces.size()) != model.num_feet()) {
    throw ModelMismatchError("expected one force per foot");
  }
  const Kinematics kin = compute_kinematics(model, state);
  const Eigen::MatrixXd M = mass_matrix(model, kin);
  Eigen::VectorXd rhs = -nonlinear_effects(model, kin, gravity);
  for (int a = 0; a < model.nva(); ++a) rhs[model.actuated_v_indices()[a]] += u[a];
  for (std::size_t f = 0; f < foot_forces.size(); ++f) {
    if (foot_forces[f].isZero(0.0)) continue;
    rhs += foot_jacobian(model, kin, static_cast<int>(f)).transpose() * foot_forces[f];
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("mass matrix is not positive definite");
  }
  return llt.solve(rhs);
}

Eigen::VectorXd integrate_configuration(const RobotModel& model, const Eigen::VectorXd& q,
                                        const Eigen::VectorXd& v, double dt) {
  if (q.size() != model.nq() || v.size() != model.nv()) {
    throw ModelMismatchError("configuration or velocity has wrong dimension");
  }
  Eigen::VectorXd out = q;
  for (std::size_t i = 0; i < model.num_bodies(); ++i) {
    const Joint& jt = model.joints()[i];
    const int qi = model.q_index(i);
    const int vi = model.v_index(i);
    switch (jt.type) {
      case JointType::kFloatingBase: {
        const Eigen::Quaterniond quat = quat_from_q(q, qi).normalized();
        out.segment<3>(qi) += quat.toRotationMatrix() * v.segment<3>(vi) * dt;
        const Eigen::Vector3d rot = v.segment<3>(vi + 3) * dt;
        const double angle = rot.norm();
        Eigen::Quaterniond dq = Eigen::Quaterniond::Identity();
        if (angle > 0.0) dq = Eigen::Quaterniond(Eigen::AngleAxisd(angle, rot / angle));
        const Eigen::Quaterniond next = (quat * dq).normalized();
        out[qi + 3] = next.x();
        out[qi + 4] = next.y();
        out[qi + 5] = next.z();
        out[qi + 6] = next.w();
        break;
      }
      case JointType::kFixedBase:
        break;
      case JointType::kRevolute:
      case JointType::kPrismatic:
        out[qi] += v[vi] * dt;
        break;
    }
  }
  return out;
}

RobotState integrate(const RobotModel& model, const RobotState& state, const Eigen::VectorXd& vdot,
                     double dt) {
  if (vdot.size() != model.nv()) throw ModelMismatchError("vdot has wrong dimension");
  RobotState next;
  next.v = state.v + vdot * dt;
  next.q = integrate_configuration(model, state.q, next.v, dt);
  next.t = state.t + dt;
  return next;
}

double kinetic_energy(const RobotModel& model, const RobotState& state) {
  const Kinematics kin = compute_kinematics(model, state);
  double e = 0.0;
  for (std::size_t i = 0; i < model.num_bodies(); ++i) {
    e += 0.5 * kin.velocity[i].dot(link_inertia(model.links()[i]) * kin.velocity[i]);
  }
  return e;
}

double potential_energy(const RobotModel& model, const RobotState& state,
                        const Eigen::Vector3d& gravity) {
  const Kinematics kin = compute_kinematics(model, state);
  double e = 0.0;
  for (std::size_t i = 0; i < model.num_bodies(); ++i) {
    const Link& l = model.links()[i];
    e -= l.mass * gravity.dot(kin.position[i] + kin.rotation[i] * l.com);
  }
  return e;
}

Eigen::Vector3d center_of_mass(const RobotModel& model, const RobotState& state) {
  const Kinematics kin = compute_kinematics(model, state);
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < model.num_bodies(); ++i) {
    const Link& l = model.links()[i];
    c += l.mass * (kin.position[i] + kin.rotation[i] * l.com);
  }
  return c / model.total_mass();
}

Eigen::Quaterniond base_orientation(const RobotModel& model, const Eigen::VectorXd& q) {
  if (!model.floating_base()) return Eigen::Quaterniond::Identity();
  return quat_from_q(q, model.q_index(0)).normalized();
}

}  // namespace legsafe::model

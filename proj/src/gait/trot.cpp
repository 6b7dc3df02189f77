#include "legsafe/gait/trot.hpp"

#include "legsafe/model/dynamics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace legsafe::gait {

namespace {

double wrap01(double x) {
  double r = std::fmod(x, 1.0);
  if (r < 0.0) r += 1.0;
  return r >= 1.0 ? 0.0 : r;
}

double phase_of(double t, const GaitSchedule& s) { return wrap01(t / s.gait_period); }

/// Actuator indices of the joints between the base and a foot, root first.
std::vector<int> leg_actuators(const model::RobotModel& m, int foot) {
  std::vector<int> out;
  int b = m.feet()[static_cast<std::size_t>(foot)].link;
  while (b >= 0) {
    const int a = m.actuator_index(static_cast<std::size_t>(b));
    if (a >= 0) out.insert(out.begin(), a);
    b = m.parent(static_cast<std::size_t>(b));
  }
  return out;
}

/// Configuration with the base at the origin and the given actuated joints.
Eigen::VectorXd base_frame_configuration(const model::RobotModel& m, const Eigen::VectorXd& joints) {
  Eigen::VectorXd q = model::neutral_state(m).q;
  for (std::size_t b = 0; b < m.num_bodies(); ++b) {
    const int a = m.actuator_index(b);
    if (a >= 0) q[m.q_index(b)] = joints[a];
  }
  return q;
}

Eigen::VectorXd actuated_positions(const model::RobotModel& m, const Eigen::VectorXd& q) {
  Eigen::VectorXd out(m.nva());
  for (std::size_t b = 0; b < m.num_bodies(); ++b) {
    const int a = m.actuator_index(b);
    if (a >= 0) out[a] = q[m.q_index(b)];
  }
  return out;
}

Eigen::VectorXd actuated_velocities(const model::RobotModel& m, const Eigen::VectorXd& v) {
  Eigen::VectorXd out(m.nva());
  const auto& idx = m.actuated_v_indices();
  for (int a = 0; a < m.nva(); ++a) out[a] = v[idx[static_cast<std::size_t>(a)]];
  return out;
}

Eigen::MatrixXd leg_jacobian(const model::RobotModel& m, const model::Kinematics& kin, int foot,
                             const std::vector<int>& acts) {
  const Eigen::MatrixXd J = model::foot_jacobian(m, kin, foot);
  Eigen::MatrixXd out(3, static_cast<Eigen::Index>(acts.size()));
  const auto& vidx = m.actuated_v_indices();
  for (std::size_t k = 0; k < acts.size(); ++k) {
    out.col(static_cast<Eigen::Index>(k)) = J.col(vidx[static_cast<std::size_t>(acts[k])]);
  }
  return out;
}

}  // namespace

void GaitSchedule::validate() const {
  if (!(gait_period > 0.0)) throw std::invalid_argument("gait period must be positive");
  if (!(duty > 0.0 && duty < 1.0)) throw std::invalid_argument("duty must lie in (0, 1)");
  if (!(step_height >= 0.0)) throw std::invalid_argument("step height must be >= 0");
  const std::array<int, 4> all{pair_a[0], pair_a[1], pair_b[0], pair_b[1]};
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      if (all[i] == all[j]) throw std::invalid_argument("trot pairs must be disjoint");
    }
    if (all[i] < 0 || all[i] > 3) throw std::invalid_argument("trot pairs must cover feet 0..3");
  }
}

double GaitSchedule::effective_step_length() const {
  return step_length >= 0.0 ? step_length : body_velocity_target * stance_duration();
}

double GaitSchedule::stance_start(int foot) const {
  if (foot == pair_a[0] || foot == pair_a[1]) return 0.0;
  if (foot == pair_b[0] || foot == pair_b[1]) return 0.5;
  throw std::invalid_argument("foot " + std::to_string(foot) + " is not in a trot pair");
}

double stance_phase(int foot, double t, const GaitSchedule& s) {
  const double local = wrap01(phase_of(t, s) - s.stance_start(foot));
  return local < s.duty ? local / s.duty : -1.0;
}

double swing_phase(int foot, double t, const GaitSchedule& s) {
  const double local = wrap01(phase_of(t, s) - s.stance_start(foot));
  return local < s.duty ? -1.0 : (local - s.duty) / (1.0 - s.duty);
}

model::ContactSet contact_schedule(double t, const GaitSchedule& schedule) {
  std::vector<int> feet;
  for (int f = 0; f < 4; ++f) {
    if (stance_phase(f, t, schedule) >= 0.0) feet.push_back(f);
  }
  return model::ContactSet(std::move(feet));
}

FootTarget swing_trajectory(int foot, double s, const GaitSchedule& schedule) {
  (void)schedule.stance_start(foot);
  const double L = schedule.effective_step_length();
  const double H = schedule.step_height;
  const double sd = 1.0 / schedule.swing_duration();
  FootTarget out;
  out.position.x() = -0.5 * L + L * (3.0 * s * s - 2.0 * s * s * s);
  out.velocity.x() = L * (6.0 * s - 6.0 * s * s) * sd;
  out.acceleration.x() = L * (6.0 - 12.0 * s) * sd * sd;
  const double sn = std::sin(M_PI * s);
  out.position.z() = H * sn * sn;
  out.velocity.z() = H * M_PI * std::sin(2.0 * M_PI * s) * sd;
  out.acceleration.z() = 2.0 * M_PI * M_PI * H * std::cos(2.0 * M_PI * s) * sd * sd;
  return out;
}

FootTarget stance_trajectory(int foot, double sigma, const GaitSchedule& schedule) {
  (void)schedule.stance_start(foot);
  const double L = schedule.effective_step_length();
  FootTarget out;
  out.position.x() = 0.5 * L - L * sigma;
  out.velocity.x() = -L / schedule.stance_duration();
  return out;
}

IkResult inverse_kinematics(const model::RobotModel& model,
                            const std::vector<Eigen::Vector3d>& foot_targets,
                            const Eigen::VectorXd& seed, int max_iterations, double tolerance) {
  if (static_cast<int>(foot_targets.size()) != model.num_feet()) {
    throw model::ModelMismatchError("one IK target per foot is required");
  }
  if (seed.size() != model.nva()) throw model::ModelMismatchError("IK seed has wrong length");
  constexpr double kDamping2 = 1e-8;
  IkResult res;
  res.joint_positions = seed;
  const int nf = model.num_feet();
  res.reached.assign(static_cast<std::size_t>(nf), false);
  res.error.assign(static_cast<std::size_t>(nf), 0.0);
  res.iterations.assign(static_cast<std::size_t>(nf), 0);
  model::RobotState st = model::neutral_state(model);
  for (int f = 0; f < nf; ++f) {
    const auto acts = leg_actuators(model, f);
    const Eigen::Vector3d& target = foot_targets[static_cast<std::size_t>(f)];
    double err = 0.0;
    Eigen::VectorXd best = res.joint_positions;
    double best_err = std::numeric_limits<double>::infinity();
    int it = 0;
    for (;; ++it) {
      st.q = base_frame_configuration(model, res.joint_positions);
      const auto kin = model::compute_kinematics(model, st);
      const Eigen::Vector3d e = target - model::foot_position(model, kin, f);
      err = e.norm();
      if (err < best_err) {
        best_err = err;
        best = res.joint_positions;
      }
      if (err <= 0.01 * tolerance || it >= max_iterations) break;
      const Eigen::MatrixXd J = leg_jacobian(model, kin, f, acts);
      const Eigen::Matrix3d A = J * J.transpose() + kDamping2 * Eigen::Matrix3d::Identity();
      const Eigen::VectorXd step = J.transpose() * A.ldlt().solve(e);
      for (std::size_t k = 0; k < acts.size(); ++k) {
        res.joint_positions[acts[k]] += step[static_cast<Eigen::Index>(k)];
      }
    }
    for (int a : acts) res.joint_positions[a] = best[a];
    res.error[static_cast<std::size_t>(f)] = best_err;
    res.reached[static_cast<std::size_t>(f)] = best_err <= tolerance;
    res.iterations[static_cast<std::size_t>(f)] = it;
  }
  return res;
}

Eigen::VectorXd nominal_torque(const model::RobotModel& model, const model::RobotState& state,
                               const Eigen::VectorXd& q_des, const Eigen::VectorXd& qd_des,
                               const PdGains& gains) {
  if (q_des.size() != model.nva() || qd_des.size() != model.nva()) {
    throw model::ModelMismatchError("desired joint vectors have wrong length");
  }
  const Eigen::VectorXd q = actuated_positions(model, state.q);
  const Eigen::VectorXd qd = actuated_velocities(model, state.v);
  const Eigen::VectorXd u = gains.kp * (q_des - q) + gains.kd * (qd_des - qd);
  const Eigen::VectorXd& tmax = model.torque_limits();
  return u.cwiseMax(-tmax).cwiseMin(tmax);
}

TrotController::TrotController(const model::RobotModel& model, TrotConfig config)
    : model_(&model), config_(std::move(config)) {
  config_.schedule.validate();
  if (model.num_feet() != 4) throw model::ModelMismatchError("trot controller needs four feet");
  stand_q_ = Eigen::VectorXd::Zero(model.nva());
  for (int f = 0; f < 4; ++f) {
    const auto acts = leg_actuators(model, f);
    if (acts.size() >= 3) {
      stand_q_[acts[1]] = config_.stand_thigh;
      stand_q_[acts[2]] = config_.stand_calf;
    }
  }
  model::RobotState st = model::neutral_state(model);
  st.q = base_frame_configuration(model, stand_q_);
  for (int f = 0; f < 4; ++f) nominal_feet_.push_back(model::foot_position(model, st, f));
  stand_height_ = -nominal_feet_[0].z();
}

model::RobotState TrotController::standing_state(double ground) const {
  model::RobotState s = model::neutral_state(*model_);
  s.q = base_frame_configuration(*model_, stand_q_);
  if (model_->floating_base()) s.q[2] = stand_height_ + ground;
  return s;
}

NominalCommand TrotController::command(const model::RobotState& state) const {
  const auto& sch = config_.schedule;
  NominalCommand cmd;
  cmd.contacts = contact_schedule(state.t, sch);
  std::vector<Eigen::Vector3d> vel(4);
  cmd.foot_targets.resize(4);
  for (int f = 0; f < 4; ++f) {
    const double sigma = stance_phase(f, state.t, sch);
    const FootTarget tr =
        sigma >= 0.0 ? stance_trajectory(f, sigma, sch) : swing_trajectory(f, swing_phase(f, state.t, sch), sch);
    const auto fi = static_cast<std::size_t>(f);
    cmd.foot_targets[fi] = nominal_feet_[fi] + tr.position;
    vel[fi] = tr.velocity;
    if (config_.stance_splay != 0.0) {
      // Ramp out during stance, smoothstep back in during swing.
      const double side = nominal_feet_[fi].y() >= 0.0 ? 1.0 : -1.0;
      const double amp = side * config_.stance_splay;
      if (sigma >= 0.0) {
        cmd.foot_targets[fi].y() += amp * sigma;
        vel[fi].y() += amp / sch.stance_duration();
      } else {
        const double s = swing_phase(f, state.t, sch);
        cmd.foot_targets[fi].y() += amp * (1.0 - s * s * (3.0 - 2.0 * s));
        vel[fi].y() -= amp * 6.0 * s * (1.0 - s) / sch.swing_duration();
      }
    }
  }
  const Eigen::VectorXd seed = actuated_positions(*model_, state.q);
  const IkResult ik = inverse_kinematics(*model_, cmd.foot_targets, seed);
  cmd.q_des = ik.joint_positions;
  for (bool r : ik.reached) cmd.ik_ok = cmd.ik_ok && r;

  cmd.qd_des = Eigen::VectorXd::Zero(model_->nva());
  model::RobotState st = model::neutral_state(*model_);
  st.q = base_frame_configuration(*model_, cmd.q_des);
  const auto kin = model::compute_kinematics(*model_, st);
  for (int f = 0; f < 4; ++f) {
    const auto acts = leg_actuators(*model_, f);
    const Eigen::MatrixXd J = leg_jacobian(*model_, kin, f, acts);
    const Eigen::Matrix3d A = J * J.transpose() + 1e-8 * Eigen::Matrix3d::Identity();
    const Eigen::VectorXd qd = J.transpose() * A.ldlt().solve(vel[static_cast<std::size_t>(f)]);
    for (std::size_t k = 0; k < acts.size(); ++k) cmd.qd_des[acts[k]] = qd[static_cast<Eigen::Index>(k)];
  }
  cmd.u = nominal_torque(*model_, state, cmd.q_des, cmd.qd_des, config_.gains);
  return cmd;
}

}  // namespace legsafe::gait

#include <doctest.h>

#include "fk_oracle.hpp"
#include "legsafe/gait/trot.hpp"
#include "legsafe/sim/scenario.hpp"
#include "test_support.hpp"

#include <cmath>
#include <random>

using namespace legsafe;
using legsafe::testing::quadruped;

TEST_CASE("trot contact schedule") {
  gait::GaitSchedule sch;
  const double T = sch.gait_period;
  CHECK(gait::contact_schedule(0.25 * T, sch) == model::ContactSet({0, 3}));
  CHECK(gait::contact_schedule(0.75 * T, sch) == model::ContactSet({1, 2}));
  CHECK(gait::contact_schedule(1.25 * T, sch) == model::ContactSet({0, 3}));

  const int n = 6000;
  for (int foot = 0; foot < 4; ++foot) {
    int in_stance = 0;
    for (int k = 0; k < n; ++k) {
      if (gait::contact_schedule((k + 0.5) * T / n, sch).contains(foot)) ++in_stance;
    }
    CHECK(in_stance * T / n == doctest::Approx(sch.duty * T).epsilon(1e-9));
  }

  CHECK(gait::swing_phase(0, 0.1 * T, sch) == -1.0);
  CHECK(gait::swing_phase(0, 0.75 * T, sch) == doctest::Approx(0.5));
  CHECK(gait::stance_phase(1, 0.75 * T, sch) == doctest::Approx(0.5));
  CHECK(sch.effective_step_length() == doctest::Approx(sch.body_velocity_target * sch.stance_duration()));

  for (double bad : {0.0, 1.0, -0.2}) {
    gait::GaitSchedule b;
    b.duty = bad;
    CHECK_THROWS_AS(b.validate(), std::invalid_argument);
  }
  gait::GaitSchedule overlap;
  overlap.pair_b = {0, 2};
  CHECK_THROWS_AS(overlap.validate(), std::invalid_argument);
}

TEST_CASE("swing arc is C2 and lands at ground height") {
  gait::GaitSchedule sch;
  const double Ts = sch.swing_duration();
  const double L = sch.effective_step_length();

  const auto start = gait::swing_trajectory(0, 0.0, sch);
  const auto end = gait::swing_trajectory(0, 1.0, sch);
  CHECK(start.position.z() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(end.position.z() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(start.position.x() == doctest::Approx(-L / 2));
  CHECK(end.position.x() == doctest::Approx(L / 2));
  CHECK(start.velocity.norm() < 1e-12);
  CHECK(end.velocity.norm() < 1e-12);
  CHECK(gait::swing_trajectory(0, 0.5, sch).position.z() == doctest::Approx(sch.step_height));

  // Time derivatives against central differences in s, and no jumps in the
  // second derivative on a fine grid.
  const double ds = 1e-5;
  double prev_acc_jump = 0.0;
  Eigen::Vector3d prev_acc = start.acceleration;
  for (int k = 1; k < 1000; ++k) {
    const double s = k / 1000.0;
    const auto a = gait::swing_trajectory(0, s - ds, sch);
    const auto b = gait::swing_trajectory(0, s + ds, sch);
    const auto c = gait::swing_trajectory(0, s, sch);
    const Eigen::Vector3d vel_fd = (b.position - a.position) / (2 * ds * Ts);
    const Eigen::Vector3d acc_fd = (b.velocity - a.velocity) / (2 * ds * Ts);
    CHECK((vel_fd - c.velocity).norm() < 1e-6);
    CHECK((acc_fd - c.acceleration).norm() < 1e-4);
    prev_acc_jump = std::max(prev_acc_jump, (c.acceleration - prev_acc).norm());
    prev_acc = c.acceleration;
  }
  // Lipschitz bound on the grid: about 13 m/s^2 amplitude times 2 pi per unit s.
  CHECK(prev_acc_jump < 0.15);

  const auto st = gait::stance_trajectory(0, 0.0, sch);
  CHECK(st.position.x() == doctest::Approx(L / 2));
  CHECK(st.position.z() == 0.0);
  CHECK(gait::stance_trajectory(0, 1.0, sch).position.x() == doctest::Approx(-L / 2));
}

TEST_CASE("inverse kinematics round trip") {
  const auto& m = quadruped();
  gait::TrotController ctl(m, gait::TrotConfig{});
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd q_true = ctl.standing_joints();
    for (int i = 0; i < q_true.size(); ++i) q_true[i] += jitter(rng);
    Eigen::VectorXd q = model::neutral_state(m).q;
    q.tail(m.nva()) = q_true;
    std::vector<Eigen::Vector3d> targets;
    for (int f = 0; f < 4; ++f) targets.push_back(legsafe::testing::oracle_foot_position(m, q, f));

    const auto ik = gait::inverse_kinematics(m, targets, ctl.standing_joints());
    q.tail(m.nva()) = ik.joint_positions;
    for (int f = 0; f < 4; ++f) {
      CHECK(ik.reached[f]);
      CHECK(ik.iterations[f] <= 50);
      CHECK((legsafe::testing::oracle_foot_position(m, q, f) - targets[f]).norm() <= 1e-6);
    }
  }

  std::vector<Eigen::Vector3d> far = ctl.nominal_feet();
  far[2] += Eigen::Vector3d(0.0, 0.0, -2.0);
  const auto ik = gait::inverse_kinematics(m, far, ctl.standing_joints());
  CHECK_FALSE(ik.reached[2]);
  CHECK(ik.error[2] > 1.0);
  CHECK(ik.reached[0]);
  CHECK(ik.joint_positions.allFinite());
}

TEST_CASE("PD torque saturates at the limits") {
  const auto& m = quadruped();
  const auto s = legsafe::testing::quadruped_standing();
  const Eigen::VectorXd q_now = s.q.tail(m.nva());
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m.nva());

  gait::PdGains g{60.0, 2.0};
  Eigen::VectorXd small = q_now;
  small[0] += 0.01;
  const Eigen::VectorXd u_small = gait::nominal_torque(m, s, small, zero, g);
  CHECK(u_small[0] == doctest::Approx(0.6));
  CHECK(u_small.tail(m.nva() - 1).norm() < 1e-12);

  const Eigen::VectorXd big = q_now + Eigen::VectorXd::Constant(m.nva(), 10.0);
  const Eigen::VectorXd u_big = gait::nominal_torque(m, s, big, zero, g);
  for (int i = 0; i < m.nva(); ++i) CHECK(u_big[i] == doctest::Approx(m.torque_limits()[i]));
  const Eigen::VectorXd u_neg = gait::nominal_torque(m, s, q_now - Eigen::VectorXd::Constant(m.nva(), 10.0), zero, g);
  for (int i = 0; i < m.nva(); ++i) CHECK(u_neg[i] == doctest::Approx(-m.torque_limits()[i]));
}

TEST_CASE("standing state puts the feet on the ground") {
  const auto& m = quadruped();
  gait::TrotController ctl(m, gait::TrotConfig{});
  const auto s = ctl.standing_state(0.1);
  for (int f = 0; f < 4; ++f) CHECK(model::foot_position(m, s, f).z() == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(s.q[2] == doctest::Approx(0.1 + ctl.standing_height()));
}

TEST_CASE("nominal trot sustains ten periods on flat ground") {
  const auto& m = quadruped();
  gait::TrotController ctl(m, gait::TrotConfig{});
  sim::Terrain terrain;
  sim::SimConfig sim_cfg;
  sim::ScenarioSettings settings;
  settings.duration = 10 * ctl.config().schedule.gait_period;
  const auto log = sim::run_scenario(m, ctl, filter::FilterConfig{}, terrain, sim_cfg, settings);
  REQUIRE_FALSE(log.failed);
  double min_z = 1e9;
  for (const auto& r : log.steps) min_z = std::min(min_z, r.base_position.z());
  CHECK(min_z >= 0.5 * ctl.standing_height());
  CHECK(log.steps.back().t >= settings.duration - 2 * settings.control_dt);
}

#include <doctest.h>

#include "legsafe/gait/trot.hpp"
#include "legsafe/sim/scenario.hpp"
#include "test_support.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace legsafe;
using legsafe::testing::quadruped;

TEST_CASE("foot contact force law") {
  sim::Terrain terrain;
  terrain.mu_true = 0.6;
  sim::SimConfig cfg;

  SUBCASE("above ground") {
    const auto c = sim::foot_contact({0.1, 0.2, 0.01}, {0.3, 0.0, -1.0}, terrain, cfg);
    CHECK(c.force.norm() == 0.0);
  }
  SUBCASE("static penetration") {
    const double delta = 2e-3;
    const auto c = sim::foot_contact({0.0, 0.0, -delta}, Eigen::Vector3d::Zero(), terrain, cfg);
    CHECK(c.force.x() == 0.0);
    CHECK(c.force.y() == 0.0);
    CHECK(c.force.z() == doctest::Approx(cfg.stiffness * delta).epsilon(1e-12));
  }
  SUBCASE("sliding foot saturates the cone") {
    for (double speed : {2e-4, 1e-2, 0.5}) {
      const Eigen::Vector3d v(speed * 0.6, -speed * 0.8, 0.0);
      const auto c = sim::foot_contact({0.0, 0.0, -1e-3}, v, terrain, cfg);
      const double lt = c.force.head<2>().norm();
      CHECK(std::abs(lt - terrain.mu_true * c.force.z()) <= 1e-9);
      CHECK(c.force.head<2>().dot(v.head<2>()) < 0.0);
    }
  }
  SUBCASE("sticking foot is regularized") {
    const Eigen::Vector3d v(0.5 * cfg.v_eps, 0.0, 0.0);
    const auto c = sim::foot_contact({0.0, 0.0, -1e-3}, v, terrain, cfg);
    CHECK(c.force.x() == doctest::Approx(-0.5 * terrain.mu_true * c.force.z()));
  }
  SUBCASE("separating foot never pulls") {
    const auto c = sim::foot_contact({0.0, 0.0, -1e-4}, {0.0, 0.0, 5.0}, terrain, cfg);
    CHECK(c.force.norm() == 0.0);
  }
}

TEST_CASE("wavy terrain normal is the height gradient normal") {
  sim::Terrain t;
  t.type = sim::TerrainType::kWaves;
  t.amplitude = 0.03;
  t.wavelength = 0.7;
  const double x = 0.31, y = -0.12, e = 1e-6;
  const double gx = (t.height(x + e, y) - t.height(x - e, y)) / (2 * e);
  const double gy = (t.height(x, y + e) - t.height(x, y - e)) / (2 * e);
  const Eigen::Vector3d expected = Eigen::Vector3d(-gx, -gy, 1.0).normalized();
  CHECK((t.normal(x, y) - expected).norm() < 1e-8);
}

TEST_CASE("standing robot settles onto its weight") {
  const auto& m = quadruped();
  gait::TrotController ctl(m, gait::TrotConfig{});
  sim::Terrain terrain;
  sim::SimConfig cfg;
  auto s = ctl.standing_state();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m.nva());
  std::vector<Eigen::Vector3d> applied;
  const int steps = static_cast<int>(std::lround(1.0 / cfg.dt));
  for (int k = 0; k < steps; ++k) {
    const Eigen::VectorXd u = gait::nominal_torque(m, s, ctl.standing_joints(), zero, ctl.config().gains);
    s = sim::step(m, s, u, terrain, cfg, &applied);
  }
  const double weight = m.total_mass() * -cfg.gravity.z();
  CHECK(std::abs(sim::total_vertical_force(applied) - weight) <= 0.01 * weight);
  CHECK(std::abs(sim::total_vertical_force(sim::contact_forces(m, s, terrain, cfg)) - weight) <= 0.01 * weight);
  CHECK(s.v.norm() < 0.1);
}

TEST_CASE("halving the step refines a contact-free trajectory") {
  const auto& m = quadruped();
  std::mt19937_64 rng(5);
  auto s0 = legsafe::testing::quadruped_standing();
  s0.q[2] = 10.0;  // far above the ground
  s0.v = legsafe::testing::random_vector(m.nv(), rng, 0.2);
  sim::Terrain terrain;
  sim::SimConfig cfg;
  cfg.gravity.setZero();
  const Eigen::VectorXd u = Eigen::VectorXd::Zero(m.nva());

  auto run = [&](double dt) {
    sim::SimConfig c = cfg;
    c.dt = dt;
    auto s = s0;
    const int n = static_cast<int>(std::lround(1.0 / dt));
    for (int k = 0; k < n; ++k) s = sim::step(m, s, u, terrain, c);
    return s;
  };
  const auto a = run(1e-3);
  const auto b = run(5e-4);
  Eigen::VectorXd diff(m.nq() + m.nv());
  diff << a.q - b.q, a.v - b.v;
  CHECK(diff.norm() < 1e-3);
}

namespace {

sim::TrajectoryLog short_run(std::uint64_t seed, bool filter) {
  const auto& m = quadruped();
  gait::TrotController ctl(m, gait::TrotConfig{});
  sim::ScenarioSettings settings;
  settings.duration = 0.4;
  settings.filter_enabled = filter;
  settings.initial_joint_noise = 0.02;
  settings.seed = seed;
  return sim::run_scenario(m, ctl, filter::FilterConfig{}, sim::Terrain{}, sim::SimConfig{}, settings);
}

std::string to_csv(const sim::TrajectoryLog& log) {
  std::ostringstream out;
  sim::write_trajectory_csv(out, log);
  return out.str();
}

}  // namespace

TEST_CASE("scenario runs are deterministic") {
  CHECK(to_csv(short_run(3, true)) == to_csv(short_run(3, true)));
  CHECK(to_csv(short_run(3, false)) != to_csv(short_run(4, false)));
}

TEST_CASE("trajectory CSV round trip") {
  const auto log = short_run(7, true);
  const std::string text = to_csv(log);
  CHECK(text.rfind("# legsafe-trajectory v1 feet=4 joints=12\n", 0) == 0);
  std::istringstream in(text);
  const auto back = sim::read_trajectory_csv(in);
  CHECK(back.steps.size() == log.steps.size());
  CHECK(to_csv(back) == text);

  std::istringstream bad_header("# other v1\nt\n");
  CHECK_THROWS(sim::read_trajectory_csv(bad_header));
  std::string truncated = text.substr(0, text.size() - 5);
  truncated = truncated.substr(0, truncated.rfind(',')) + "\n";
  std::istringstream bad_row(truncated);
  CHECK_THROWS(sim::read_trajectory_csv(bad_row));
}

TEST_CASE("GRF error ignores the blanking window") {
  sim::TrajectoryLog log;
  log.num_feet = 1;
  log.num_joints = 0;
  for (int k = 0; k < 10; ++k) {
    sim::StepRecord r;
    r.t = 0.01 * k;
    r.stance = {1};
    r.lambda_pred = Eigen::Vector3d(1.0, 0.0, 10.0);
    r.lambda_true = k < 2 ? Eigen::Vector3d(50.0, 0.0, 90.0) : Eigen::Vector3d(2.0, 0.0, 12.0);
    log.steps.push_back(r);
  }
  const auto e = sim::measure_grf_error(log, 0.02);
  CHECK(e.samples == 8);
  CHECK(e.mae_vertical == doctest::Approx(2.0));
  CHECK(e.mae_lateral == doctest::Approx(0.5));
}

TEST_CASE("warm starts do not cost iterations along a trajectory") {
  const auto& m = quadruped();
  gait::TrotController ctl(m, gait::TrotConfig{});
  filter::FilterConfig cfg;
  cfg.mu = 0.3;
  filter::SafetyFilter filt(m, cfg);
  sim::SimConfig sim_cfg;
  auto s = ctl.standing_state();
  long warm = 0;
  long cold = 0;
  for (int k = 0; k < 500; ++k) {
    const auto cmd = ctl.command(s);
    const auto d = filt.step(s, cmd.contacts, cmd.u);
    const auto c = filter::filter_step(m, s, cmd.contacts, cmd.u, cfg);
    REQUIRE(d.status == qp::QpStatus::kOptimal);
    warm += d.iterations;
    cold += c.iterations;
    for (int sub = 0; sub < 2; ++sub) s = sim::step(m, s, d.u_filtered, sim::Terrain{}, sim_cfg);
  }
  MESSAGE("warm " << warm << " cold " << cold);
  CHECK(warm <= cold);
}

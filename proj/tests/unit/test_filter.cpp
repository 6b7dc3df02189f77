#include <doctest.h>

#include "fk_oracle.hpp"
#include "legsafe/filter/safety_filter.hpp"
#include "test_support.hpp"

#include <cmath>

using namespace legsafe;
using legsafe::testing::quadruped;
using legsafe::testing::quadruped_standing;

namespace {

const model::ContactSet kPairA({0, 3});

filter::FilterConfig flat_profile_config(double ground = 0.0) {
  filter::FilterConfig cfg;
  for (int f = 0; f < 4; ++f) {
    filter::FootClearance fc;
    fc.window_start = (f == 0 || f == 3) ? 0.5 : 0.0;
    fc.window_length = 0.5;
    fc.profile = filter::PolynomialProfile({ground});
    fc.terrain_height = ground;
    cfg.obstacle_profile.push_back(fc);
  }
  return cfg;
}

// Torque that holds the standing robot with vdot = 0 and the weight shared
// through the least-norm set of contact forces.
Eigen::VectorXd holding_torque(const model::RobotModel& m, const model::RobotState& s,
                               const model::ContactSet& contacts) {
  const Eigen::VectorXd H = model::nonlinear_effects(m, s);
  const Eigen::MatrixXd Jc = model::contact_jacobian(m, s, contacts);
  const Eigen::MatrixXd JbT = Jc.leftCols(6).transpose();
  const Eigen::VectorXd lambda = JbT.completeOrthogonalDecomposition().solve(H.head(6));
  return H.tail(m.nva()) - Jc.rightCols(m.nva()).transpose() * lambda;
}

bool pyramid_predicate(const Eigen::Vector3d& l, double mu_t) {
  return std::abs(l.x()) <= mu_t * l.z() && std::abs(l.y()) <= mu_t * l.z() && l.z() > 0.0;
}

}  // namespace

TEST_CASE("phase variable") {
  const double T = 0.6;
  CHECK(filter::phase(0.0, T).phi == 0.0);
  CHECK(filter::phase(T, T).phi == doctest::Approx(0.0));
  const auto p = filter::phase(0.25 * T, T);
  CHECK(p.phi == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(p.phi_dot == doctest::Approx(1.0 / T));
  CHECK(p.phi_ddot == 0.0);
  for (double t = 0.0; t < 5.0; t += 0.0137) {
    const auto q = filter::phase(t, T);
    CHECK(q.phi >= 0.0);
    CHECK(q.phi < 1.0);
  }
  CHECK_THROWS(filter::phase(1.0, 0.0));
}

TEST_CASE("clearance profile remap") {
  filter::FootClearance fc;
  fc.window_start = 0.5;
  fc.window_length = 0.5;
  fc.profile = filter::PolynomialProfile({0.0, 1.0, 2.0});  // s + 2 s^2
  fc.terrain_height = -0.01;
  const auto in = fc.evaluate(0.75);  // s = 0.5
  CHECK(in.in_window);
  CHECK(in.z == doctest::Approx(0.5 + 0.5));
  CHECK(in.dz == doctest::Approx((1.0 + 4.0 * 0.5) / 0.5));
  CHECK(in.ddz == doctest::Approx(4.0 / 0.25));
  const auto out = fc.evaluate(0.25);
  CHECK_FALSE(out.in_window);
  CHECK(out.z == -0.01);
  CHECK(out.dz == 0.0);
  // Finite-difference check of the phase derivatives inside the window.
  const double d = 1e-6;
  const auto a = fc.evaluate(0.7 - d);
  const auto b = fc.evaluate(0.7 + d);
  CHECK((b.z - a.z) / (2 * d) == doctest::Approx(fc.evaluate(0.7).dz).epsilon(1e-6));
  CHECK((b.dz - a.dz) / (2 * d) == doctest::Approx(fc.evaluate(0.7).ddz).epsilon(1e-6));

  const auto bump = filter::PolynomialProfile::bump(0.1, -0.005);
  CHECK(bump.value(0.5) == doctest::Approx(0.095));
  CHECK(bump.value(0.0) == doctest::Approx(-0.005));
  CHECK(bump.derivative(0.0) == doctest::Approx(0.0));
  CHECK(bump.derivative(1.0) == doctest::Approx(0.0));
}

TEST_CASE("effective friction coefficient") {
  CHECK(filter::effective_friction(0.2) == doctest::Approx(0.141421).epsilon(1e-6));
}

TEST_CASE("friction rows match the pyramid predicate") {
  const model::ContactSet cs({1, 2});
  const double mu = 0.6;
  const auto rows = filter::friction_rows(cs, mu, 0.0);
  REQUIRE(rows.G.rows() == 10);
  REQUIRE(rows.G.cols() == 6);
  Eigen::VectorXd pure(6);
  pure << 0, 0, 50, 0, 0, 50;
  for (double m : {0.05, 0.2, 1.0}) {
    const auto r = filter::friction_rows(cs, m, 1.0);
    CHECK(((r.G * pure - r.h).array() <= 0.0).all());
  }
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  const double mt = filter::effective_friction(mu);
  int agree = 0;
  for (int k = 0; k < 1000; ++k) {
    Eigen::VectorXd l(6);
    for (int i = 0; i < 6; ++i) l[i] = u(rng);
    const bool rows_ok = ((rows.G * l - rows.h).array() <= 0.0).all();
    const bool oracle = pyramid_predicate(l.head<3>(), mt) && pyramid_predicate(l.tail<3>(), mt);
    agree += rows_ok == oracle;
  }
  CHECK(agree == 1000);
}

TEST_CASE("barrier value") {
  const auto& m = quadruped();
  auto s = quadruped_standing();
  s.q[2] += 0.05;
  const auto cfg = flat_profile_config();
  CHECK(filter::barrier_value(m, s, 1, cfg, 0.3) == doctest::Approx(0.05).epsilon(1e-12));
  s.q[2] -= 0.05;
  CHECK(std::abs(filter::barrier_value(m, s, 1, cfg, 0.3)) <= 1e-12);
}

TEST_CASE("barrier trace agrees with independent kinematics") {
  const auto& m = quadruped();
  filter::FilterConfig cfg;
  for (int f = 0; f < 4; ++f) {
    filter::FootClearance fc;
    fc.window_start = (f == 0 || f == 3) ? 0.5 : 0.0;
    fc.profile = filter::PolynomialProfile({-0.005, 0.1, 1.2, -2.6, 1.3});
    cfg.obstacle_profile.push_back(fc);
  }
  auto s = quadruped_standing();
  const Eigen::VectorXd q0 = s.q;
  double worst = 0.0;
  for (int k = 0; k <= 200; ++k) {
    const double phi = k / 200.0;
    s.q = q0;
    for (int leg = 0; leg < 4; ++leg) {
      s.q[7 + 3 * leg + 1] += 0.3 * std::sin(2 * M_PI * phi + leg);
      s.q[7 + 3 * leg + 2] -= 0.4 * std::sin(M_PI * phi);
    }
    for (int f = 0; f < 4; ++f) {
      const double h = filter::barrier_value(m, s, f, cfg, phi);
      const auto zs = cfg.obstacle_profile[static_cast<std::size_t>(f)];
      const double sl = zs.local_phase(phi);
      const double zref = sl < 0.0 ? 0.0 : -0.005 + 0.1 * sl + 1.2 * sl * sl - 2.6 * std::pow(sl, 3) + 1.3 * std::pow(sl, 4);
      const double expected = legsafe::testing::oracle_foot_position(m, s.q, f).z() - zref;
      worst = std::max(worst, std::abs(h - expected));
    }
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("ECBF row structure") {
  const auto& m = quadruped();
  auto s = quadruped_standing();
  std::mt19937_64 rng(11);
  s.v = legsafe::testing::random_vector(m.nv(), rng, 0.3);
  s.t = 0.11;
  auto cfg = flat_profile_config();
  const auto ph = filter::phase(s.t, cfg.gait_period);

  SUBCASE("stance foot is a contract violation") {
    CHECK_THROWS_AS(filter::ecbf_row(m, s, kPairA, 0, cfg, ph), filter::ContractError);
  }

  SUBCASE("v-dot coefficients are the negated vertical foot Jacobian") {
    const auto row = filter::ecbf_row(m, s, kPairA, 1, cfg, ph);
    // Vertical foot velocity is linear in v; recover its gradient by probing.
    Eigen::RowVectorXd jz(m.nv());
    for (int i = 0; i < m.nv(); ++i) {
      model::RobotState e = s;
      e.v.setZero();
      e.v[i] = 1.0;
      jz[i] = model::foot_velocity(m, e, 1).z();
    }
    CHECK((row.g.head(m.nv()) + jz).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(row.g.tail(row.g.size() - m.nv()).isZero());
  }

  SUBCASE("equal gains reduce to a linear CBF on the auxiliary barrier") {
    cfg.alpha1 = cfg.alpha2 = 7.0;
    cfg.obstacle_profile[1].profile = filter::PolynomialProfile({0.01, -0.2, 0.5, 0.3, -0.4});
    const auto kin = model::compute_kinematics(m, s);
    const filter::DecisionLayout L{m.nv(), m.nva(), 6};
    const auto row = filter::ecbf_row(m, kin, s, kPairA, 1, cfg, ph, L);
    const auto zs = cfg.obstacle_profile[1].evaluate(ph.phi);
    const Eigen::MatrixXd J = model::foot_jacobian(m, kin, 1);
    const double drift = model::foot_jacobian_dot_v(m, kin, 1).z() - zs.ddz * ph.phi_dot * ph.phi_dot;
    // (d/dt + a)^2 h >= 0 expanded: hddot + 2a hdot + a^2 h >= 0.
    const double hdot = (J * s.v)[2] - zs.dz * ph.phi_dot;
    const double h = model::foot_position(m, kin, 1).z() - zs.z;
    const double a = 7.0;
    CHECK(row.h_ub == doctest::Approx(drift + 2 * a * hdot + a * a * h).epsilon(1e-12));
    const auto lin = filter::linear_cbf_row(L, J.row(2), drift + a * hdot, row.h_e, a);
    CHECK((lin.g - row.g).cwiseAbs().maxCoeff() == 0.0);
    CHECK(lin.h_ub == doctest::Approx(row.h_ub).epsilon(1e-12));
  }

  SUBCASE("boundary state demands upward acceleration matching the profile curvature") {
    s.v.setZero();
    const double pz = model::foot_position(m, s, 1).z();
    const auto fc = cfg.obstacle_profile[1];
    const double sl = fc.local_phase(ph.phi);
    REQUIRE(sl >= 0.0);
    // z(s) = pz + 0.3 (s - sl)^2 touches the foot with zero slope at sl.
    cfg.obstacle_profile[1].profile = filter::PolynomialProfile({pz + 0.3 * sl * sl, -0.6 * sl, 0.3});
    const auto row = filter::ecbf_row(m, s, kPairA, 1, cfg, ph);
    CHECK(std::abs(row.h) <= 1e-12);
    CHECK(std::abs(row.h_dot) <= 1e-12);
    const double zdd = 0.6 / (fc.window_length * fc.window_length);
    CHECK(row.h_ub == doctest::Approx(-zdd * ph.phi_dot * ph.phi_dot).epsilon(1e-9));
  }
}

TEST_CASE("static robot with foot far above the profile leaves the row inactive") {
  const auto& m = quadruped();
  auto s = quadruped_standing();
  s.t = 0.1;
  const auto cfg = flat_profile_config(-0.3);
  const Eigen::VectorXd u_nom = holding_torque(m, s, kPairA);
  const auto d = filter::filter_step(m, s, kPairA, u_nom, cfg);
  REQUIRE(d.status == qp::QpStatus::kOptimal);
  for (int f : {1, 2}) {
    CHECK(d.ecbf_rhs[f] > 0.0);
    CHECK(d.ecbf_slack[f] > 1e-3);
  }
}

TEST_CASE("minimal intrusiveness when standing") {
  const auto& m = quadruped();
  const auto s = quadruped_standing();
  const auto all = model::ContactSet::all(m);
  filter::FilterConfig cfg;
  const Eigen::VectorXd u_nom = holding_torque(m, s, all);
  const auto pred = filter::predict_contact_forces(m, s, all, u_nom);
  for (int i = 0; i < 4; ++i) {
    REQUIRE(pyramid_predicate(pred.lambda.segment<3>(3 * i), filter::effective_friction(cfg.mu)));
    REQUIRE(pred.lambda[3 * i + 2] > cfg.min_normal_force);
  }
  REQUIRE((u_nom.cwiseAbs() - m.torque_limits()).maxCoeff() < 0.0);
  const auto d = filter::filter_step(m, s, all, u_nom, cfg);
  REQUIRE(d.status == qp::QpStatus::kOptimal);
  CHECK(d.interference <= 1e-5);
  CHECK((d.lambda - pred.lambda).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("optimal steps certify friction and dynamics") {
  const auto& m = quadruped();
  std::mt19937_64 rng(17);
  filter::FilterConfig cfg = flat_profile_config();
  cfg.mu = 0.2;
  const double mt = filter::effective_friction(cfg.mu);
  int optimal = 0;
  for (int k = 0; k < 40; ++k) {
    auto s = quadruped_standing();
    s.q.segment(7, 12) += legsafe::testing::random_vector(12, rng, 0.1);
    s.v = legsafe::testing::random_vector(m.nv(), rng, 0.2);
    s.t = 0.01 * k;
    const Eigen::VectorXd u_nom = legsafe::testing::random_vector(12, rng, 15.0);
    const auto d = filter::filter_step(m, s, kPairA, u_nom, cfg);
    if (d.status != qp::QpStatus::kOptimal) continue;
    ++optimal;
    for (int i = 0; i < 2; ++i) {
      const Eigen::Vector3d l = d.lambda.segment<3>(3 * i);
      CHECK(std::abs(l.x()) <= mt * l.z() + 1e-6);
      CHECK(std::abs(l.y()) <= mt * l.z() + 1e-6);
    }
    const Eigen::VectorXd res = model::mass_matrix(m, s) * d.v_dot + model::nonlinear_effects(m, s) -
                                m.selection_matrix() * d.u_filtered -
                                model::contact_jacobian(m, s, kPairA).transpose() * d.lambda;
    CHECK(res.cwiseAbs().maxCoeff() <= 1e-5);
    CHECK((d.u_filtered.cwiseAbs() - m.torque_limits()).maxCoeff() <= 1e-6);
  }
  CHECK(optimal >= 35);
}

TEST_CASE("ECBF row sign agrees with finite differences along the solved motion") {
  const auto& m = quadruped();
  std::mt19937_64 rng(23);
  filter::FilterConfig cfg;
  for (int f = 0; f < 4; ++f) {
    filter::FootClearance fc;
    fc.window_start = (f == 0 || f == 3) ? 0.5 : 0.0;
    fc.profile = filter::PolynomialProfile::bump(0.08, -0.02);
    cfg.obstacle_profile.push_back(fc);
  }
  cfg.friction_enabled = false;
  auto h_e = [&](const model::RobotState& st, int foot) {
    const auto ph = filter::phase(st.t, cfg.gait_period);
    const auto zs = cfg.obstacle_profile[static_cast<std::size_t>(foot)].evaluate(ph.phi);
    const double h = model::foot_position(m, st, foot).z() - zs.z;
    const double hd = model::foot_velocity(m, st, foot).z() - zs.dz * ph.phi_dot;
    return hd + cfg.alpha1 * h;
  };
  int samples = 0;
  int agree = 0;
  for (int k = 0; k < 400 && samples < 100; ++k) {
    auto s = quadruped_standing();
    s.q.segment(7, 12) += legsafe::testing::random_vector(12, rng, 0.2);
    s.v = legsafe::testing::random_vector(m.nv(), rng, 0.5);
    std::uniform_real_distribution<double> ut(0.02, 0.28);
    s.t = ut(rng);  // pair B in swing, away from the window edges
    const Eigen::VectorXd u_nom = legsafe::testing::random_vector(12, rng, 20.0);
    const auto d = filter::filter_step(m, s, kPairA, u_nom, cfg);
    if (d.status != qp::QpStatus::kOptimal) continue;
    for (int f : {1, 2}) {
      const double row_value = d.ecbf_slack[f];
      const double dt = 1e-6;
      auto shifted = [&](double sgn) {
        model::RobotState o = s;
        const double tau = sgn * dt;
        o.q = model::integrate_configuration(m, s.q, tau * s.v + 0.5 * tau * tau * d.v_dot, 1.0);
        o.v = s.v + tau * d.v_dot;
        o.t = s.t + tau;
        return o;
      };
      const double fd = (h_e(shifted(1.0), f) - h_e(shifted(-1.0), f)) / (2 * dt) + cfg.alpha2 * h_e(s, f);
      CHECK(row_value == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
      const bool same = (row_value >= -1e-6) == (fd >= -1e-6);
      agree += same;
    }
    ++samples;
  }
  CHECK(samples == 100);
  CHECK(agree == 200);
}

TEST_CASE("infeasible step falls back to the previous command") {
  const auto& m = quadruped();
  const auto s = quadruped_standing();
  filter::FilterConfig cfg;
  cfg.min_normal_force = 1e5;
  const Eigen::VectorXd prev = Eigen::VectorXd::Constant(12, 1.5);
  const auto d = filter::filter_step(m, s, model::ContactSet::all(m), Eigen::VectorXd::Zero(12), cfg,
                                     std::nullopt, prev);
  CHECK(d.status != qp::QpStatus::kOptimal);
  CHECK(d.fallback);
  CHECK(d.u_filtered == prev);
  CHECK(std::isnan(d.lambda[0]));
}

TEST_CASE("safety filter warm starts and stays deterministic") {
  const auto& m = quadruped();
  auto s = quadruped_standing();
  const auto all = model::ContactSet::all(m);
  const Eigen::VectorXd u_nom = holding_torque(m, s, all) + Eigen::VectorXd::Constant(12, 0.5);
  filter::FilterConfig cfg;
  cfg.mu = 0.2;
  filter::SafetyFilter a(m, cfg);
  filter::SafetyFilter b(m, cfg);
  const auto d1 = a.step(s, all, u_nom);
  const auto d2 = a.step(s, all, u_nom);
  const auto e1 = b.step(s, all, u_nom);
  CHECK(d1.u_filtered == e1.u_filtered);
  CHECK(d2.iterations <= d1.iterations);
}

TEST_CASE("config validation and smoothing") {
  filter::FilterConfig cfg;
  cfg.alpha1 = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg.alpha1 = 1.0;
  cfg.mu = -0.1;
  CHECK_THROWS(cfg.validate());

  filter::FrictionSmoother sm(0.8, 0.5);
  double v = 0.0;
  for (int k = 0; k < 250; ++k) v = sm.update(0.2, 0.002);
  CHECK(v == doctest::Approx(0.2 + 0.6 * std::exp(-1.0)).epsilon(1e-9));
}

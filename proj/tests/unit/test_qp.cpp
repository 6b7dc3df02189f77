#include <doctest.h>

#include "legsafe/qp/qp.hpp"
#include "qp_oracle.hpp"

#include <sstream>

using namespace legsafe;

namespace {

void check_kkt(const qp::QpProblem& pb, const qp::QpSolution& sol, double tol = 1e-6) {
  const auto r = qp::kkt_residuals(pb, sol.x_star, sol.duals_eq, sol.duals_ineq);
  CHECK(r.primal <= tol);
  CHECK(r.dual <= tol);
  CHECK(r.complementarity <= tol);
  if (pb.num_inequalities() > 0) CHECK(r.min_dual_ineq >= -tol);
}

}  // namespace

TEST_CASE("single active bound") {
  qp::QpProblem pb;
  pb.P = Eigen::MatrixXd::Identity(1, 1);
  pb.c = Eigen::VectorXd::Zero(1);
  pb.A_eq.resize(0, 1);
  pb.b_eq.resize(0);
  pb.G = -Eigen::MatrixXd::Identity(1, 1);
  pb.h_ub = -Eigen::VectorXd::Ones(1);
  const auto sol = qp::solve(pb);
  REQUIRE(sol.status == qp::QpStatus::kOptimal);
  CHECK(sol.x_star[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(sol.duals_ineq[0] == doctest::Approx(1.0).epsilon(1e-6));
  check_kkt(pb, sol);
}

TEST_CASE("unconstrained problem reaches the stationary point") {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 20; ++k) {
    auto pb = legsafe::testing::random_qp(rng, 6, 0);
    pb.A_eq.resize(0, pb.num_variables());
    pb.b_eq.resize(0);
    const auto sol = qp::solve(pb);
    REQUIRE(sol.status == qp::QpStatus::kOptimal);
    const Eigen::VectorXd expected = -pb.P.ldlt().solve(pb.c);
    CHECK((sol.x_star - expected).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("random QPs agree with active-set enumeration") {
  std::mt19937_64 rng(2024);
  int checked = 0;
  for (int k = 0; k < 200; ++k) {
    const auto pb = legsafe::testing::random_qp(rng);
    const auto ref = legsafe::testing::enumerate_active_sets(pb);
    REQUIRE(ref.has_value());
    const auto sol = qp::solve(pb);
    REQUIRE(sol.status == qp::QpStatus::kOptimal);
    CHECK((sol.x_star - *ref).cwiseAbs().maxCoeff() <= 1e-5);
    check_kkt(pb, sol);
    ++checked;
  }
  CHECK(checked == 200);
}

TEST_CASE("infeasible problem is reported, not thrown") {
  qp::QpProblem pb;
  pb.P = Eigen::MatrixXd::Identity(2, 2);
  pb.c = Eigen::VectorXd::Zero(2);
  pb.A_eq.resize(0, 2);
  pb.b_eq.resize(0);
  pb.G.resize(2, 2);
  pb.G << -1, 0,   // x0 >= 1
           1, 0;   // x0 <= 0
  pb.h_ub.resize(2);
  pb.h_ub << -1, 0;
  const auto sol = qp::solve(pb);
  CHECK(sol.status == qp::QpStatus::kInfeasible);
}

TEST_CASE("unbounded problem is detected") {
  qp::QpProblem pb;
  pb.P = Eigen::MatrixXd::Zero(2, 2);
  pb.P(0, 0) = 1.0;
  pb.c = Eigen::VectorXd(2);
  pb.c << 0.0, 1.0;
  pb.A_eq.resize(0, 2);
  pb.b_eq.resize(0);
  pb.G.resize(0, 2);
  pb.h_ub.resize(0);
  const auto sol = qp::solve(pb);
  CHECK(sol.status == qp::QpStatus::kUnbounded);
}

TEST_CASE("invalid inputs are rejected") {
  qp::QpProblem pb;
  pb.P = Eigen::MatrixXd::Identity(2, 2);
  pb.P(0, 0) = -1.0;
  pb.c = Eigen::VectorXd::Zero(2);
  pb.A_eq.resize(0, 2);
  pb.b_eq.resize(0);
  pb.G.resize(0, 2);
  pb.h_ub.resize(0);
  CHECK_THROWS_AS(qp::solve(pb), qp::QpInputError);
  pb.P = Eigen::MatrixXd::Identity(2, 2);
  pb.P(0, 1) = 0.5;
  CHECK_THROWS_AS(qp::solve(pb), qp::QpInputError);
  pb.P = Eigen::MatrixXd::Identity(2, 2);
  pb.G = Eigen::MatrixXd::Ones(1, 3);
  pb.h_ub = Eigen::VectorXd::Ones(1);
  CHECK_THROWS_AS(qp::solve(pb), qp::QpInputError);

  pb.G = Eigen::MatrixXd::Ones(1, 2);
  qp::QpSettings st;
  st.warm_start = qp::WarmStart{Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(1)};
  CHECK_THROWS_AS(qp::solve(pb, st), qp::QpInputError);
}

TEST_CASE("solves are deterministic and warm starts are accepted") {
  std::mt19937_64 rng(99);
  const auto pb = legsafe::testing::random_qp(rng);
  const auto a = qp::solve(pb);
  const auto b = qp::solve(pb);
  CHECK(a.x_star == b.x_star);
  CHECK(a.duals_ineq == b.duals_ineq);
  CHECK(a.iterations == b.iterations);

  qp::QpSettings st;
  st.warm_start = qp::warm_start_from(a);
  const auto c = qp::solve(pb, st);
  REQUIRE(c.status == qp::QpStatus::kOptimal);
  CHECK(c.iterations <= a.iterations);
  CHECK((c.x_star - a.x_star).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("problem dump round trip") {
  std::mt19937_64 rng(5);
  const auto pb = legsafe::testing::random_qp(rng);
  std::stringstream ss;
  qp::write_problem(ss, pb);
  const auto back = qp::read_problem(ss);
  CHECK(back.P == pb.P);
  CHECK(back.c == pb.c);
  CHECK(back.G == pb.G);
  CHECK(back.h_ub == pb.h_ub);
  CHECK(back.A_eq.rows() == pb.A_eq.rows());
  std::stringstream bad("# something else\n");
  CHECK_THROWS_AS(qp::read_problem(bad), qp::QpInputError);
}

#pragma once

// Brute-force reference for small QPs: try every active set of the
// inequalities, solve the resulting KKT system, and keep the best point that
// is primal feasible with non-negative multipliers.

#include "legsafe/qp/qp.hpp"

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <random>

namespace legsafe::testing {

inline std::optional<Eigen::VectorXd> enumerate_active_sets(const qp::QpProblem& pb) {
  const int n = pb.num_variables();
  const int me = pb.num_equalities();
  const int mi = pb.num_inequalities();
  std::optional<Eigen::VectorXd> best;
  double best_obj = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << mi); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < mi; ++i) {
      if (mask & (1u << i)) act.push_back(i);
    }
    const int k = me + static_cast<int>(act.size());
    if (k > n) continue;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + k, n + k);
    Eigen::VectorXd rhs(n + k);
    K.topLeftCorner(n, n) = pb.P;
    rhs.head(n) = -pb.c;
    for (int r = 0; r < me; ++r) {
      K.block(n + r, 0, 1, n) = pb.A_eq.row(r);
      rhs[n + r] = pb.b_eq[r];
    }
    for (std::size_t r = 0; r < act.size(); ++r) {
      K.block(n + me + r, 0, 1, n) = pb.G.row(act[r]);
      rhs[n + me + r] = pb.h_ub[act[r]];
    }
    K.topRightCorner(n, k) = K.bottomLeftCorner(k, n).transpose();
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd sol = lu.solve(rhs);
    const Eigen::VectorXd x = sol.head(n);
    if (mi > 0 && (pb.G * x - pb.h_ub).maxCoeff() > 1e-9) continue;
    bool duals_ok = true;
    for (std::size_t r = 0; r < act.size(); ++r) duals_ok &= sol[n + me + r] >= -1e-9;
    if (!duals_ok) continue;
    const double obj = pb.objective(x);
    if (obj < best_obj) {
      best_obj = obj;
      best = x;
    }
  }
  return best;
}

/// Feasible random QP with SPD P: n in [1, max_n], m_i in [0, max_mi],
/// occasionally with equality rows.
inline qp::QpProblem random_qp(std::mt19937_64& rng, int max_n = 6, int max_mi = 8) {
  std::uniform_int_distribution<int> dn(1, max_n);
  std::uniform_int_distribution<int> dm(0, max_mi);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> slack(0.0, 1.0);
  const int n = dn(rng);
  const int mi = dm(rng);
  const int me = (n > 2 && slack(rng) < 0.3) ? 1 : 0;
  auto rand_mat = [&](int r, int c) {
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) m(i, j) = u(rng);
    }
    return m;
  };
  qp::QpProblem pb;
  const Eigen::MatrixXd L = rand_mat(n, n);
  pb.P = L * L.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
  pb.c = 3.0 * rand_mat(n, 1);
  const Eigen::VectorXd x0 = rand_mat(n, 1);
  pb.A_eq = rand_mat(me, n);
  pb.b_eq = pb.A_eq * x0;
  pb.G = rand_mat(mi, n);
  pb.h_ub = pb.G * x0;
  for (int i = 0; i < mi; ++i) pb.h_ub[i] += slack(rng);
  return pb;
}

}  // namespace legsafe::testing

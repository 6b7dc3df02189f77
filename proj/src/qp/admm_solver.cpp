#include "legsafe/qp/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace legsafe::qp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEqualityRhoScale = 1e3;
constexpr int kPolishInterval = 10;
constexpr int kRefinementSteps = 3;
constexpr double kPolishRegularization = 1e-9;
constexpr int kRhoUpdateInterval = 25;
constexpr double kRhoUpdateFactor = 5.0;
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;

double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

double col_inf_norm(const Eigen::MatrixXd& m, Eigen::Index j) {
  return m.rows() == 0 ? 0.0 : m.col(j).cwiseAbs().maxCoeff();
}

double clamp_scale(double s) { return (s < 1e-4 || !std::isfinite(s)) ? 1.0 : std::min(s, 1e4); }

// Working form: l <= A x <= u with equalities first.
struct Workspace {
  int n = 0;
  int me = 0;
  int m = 0;
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd A;
  Eigen::VectorXd l;
  Eigen::VectorXd u;
  Eigen::VectorXd D;  // variable scaling
  Eigen::VectorXd E;  // constraint scaling
  double cost_scale = 1.0;
  Eigen::VectorXd rho;
};

Workspace build_workspace(const QpProblem& pb, const QpSettings& st) {
  Workspace w;
  w.n = pb.num_variables();
  w.me = pb.num_equalities();
  w.m = w.me + pb.num_inequalities();
  w.P = pb.P;
  w.q = pb.c;
  w.A.resize(w.m, w.n);
  if (w.me > 0) w.A.topRows(w.me) = pb.A_eq;
  if (w.m > w.me) w.A.bottomRows(w.m - w.me) = pb.G;
  w.l.resize(w.m);
  w.u.resize(w.m);
  w.l.head(w.me) = pb.b_eq;
  w.u.head(w.me) = pb.b_eq;
  w.l.tail(w.m - w.me).setConstant(-kInf);
  w.u.tail(w.m - w.me) = pb.h_ub;

  // Ruiz equilibration of [P A'; A 0] followed by a cost scaling.
  w.D = Eigen::VectorXd::Ones(w.n);
  w.E = Eigen::VectorXd::Ones(w.m);
  for (int it = 0; it < st.scaling_iterations; ++it) {
    Eigen::VectorXd dd(w.n);
    for (int j = 0; j < w.n; ++j) {
      dd[j] = 1.0 / std::sqrt(clamp_scale(std::max(col_inf_norm(w.P, j), col_inf_norm(w.A, j))));
    }
    Eigen::VectorXd ee(w.m);
    for (int i = 0; i < w.m; ++i) {
      ee[i] = 1.0 / std::sqrt(clamp_scale(w.A.row(i).cwiseAbs().maxCoeff()));
    }
    w.P = dd.asDiagonal() * w.P * dd.asDiagonal();
    w.q = dd.asDiagonal() * w.q;
    w.A = ee.asDiagonal() * w.A * dd.asDiagonal();
    w.D = w.D.cwiseProduct(dd);
    w.E = w.E.cwiseProduct(ee);
  }
  if (st.scaling_iterations > 0 && w.n > 0) {
    double mean_col = 0.0;
    for (int j = 0; j < w.n; ++j) mean_col += col_inf_norm(w.P, j);
    mean_col /= w.n;
    w.cost_scale = 1.0 / clamp_scale(std::max(mean_col, inf_norm(w.q)));
    w.P *= w.cost_scale;
    w.q *= w.cost_scale;
  }
  for (int i = 0; i < w.m; ++i) {
    if (std::isfinite(w.l[i])) w.l[i] *= w.E[i];
    if (std::isfinite(w.u[i])) w.u[i] *= w.E[i];
  }
  w.rho = Eigen::VectorXd::Constant(w.m, st.rho);
  w.rho.head(w.me) *= kEqualityRhoScale;
  return w;
}

struct Candidate {
  Eigen::VectorXd x;
  Eigen::VectorXd nu;
  Eigen::VectorXd mu;
  KktResiduals res;
};

bool acceptable(const KktResiduals& r, const QpSettings& st) {
  return r.primal <= st.tol_feas && r.dual <= st.tol_opt && r.complementarity <= st.tol_opt &&
         r.min_dual_ineq >= -st.tol_opt;
}

Candidate unscale(const QpProblem& pb, const Workspace& w, const Eigen::VectorXd& xs,
                  const Eigen::VectorXd& ys) {
  Candidate c;
  c.x = w.D.cwiseProduct(xs);
  const Eigen::VectorXd y = w.E.cwiseProduct(ys) / w.cost_scale;
  c.nu = y.head(w.me);
  c.mu = y.tail(w.m - w.me);
  c.res = kkt_residuals(pb, c.x, c.nu, c.mu);
  return c;
}

// Solve the equality-constrained QP on the guessed active set (in the
// original, unscaled data) with a regularized KKT system plus refinement.
std::optional<Candidate> polish(const QpProblem& pb, const std::vector<int>& active_ineq) {
  const int n = pb.num_variables();
  const int me = pb.num_equalities();
  const int ma = static_cast<int>(active_ineq.size());
  const int k = me + ma;
  Eigen::MatrixXd Aact(k, n);
  Eigen::VectorXd bact(k);
  if (me > 0) Aact.topRows(me) = pb.A_eq;
  bact.head(me) = pb.b_eq;
  for (int r = 0; r < ma; ++r) {
    Aact.row(me + r) = pb.G.row(active_ineq[r]);
    bact[me + r] = pb.h_ub[active_ineq[r]];
  }
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + k, n + k);
  K.topLeftCorner(n, n) = pb.P;
  K.topRightCorner(n, k) = Aact.transpose();
  K.bottomLeftCorner(k, n) = Aact;
  Eigen::MatrixXd Kreg = K;
  Kreg.topLeftCorner(n, n).diagonal().array() += kPolishRegularization;
  Kreg.bottomRightCorner(k, k).diagonal().array() -= kPolishRegularization;
  Eigen::VectorXd rhs(n + k);
  rhs.head(n) = -pb.c;
  rhs.tail(k) = bact;

  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(Kreg);
  Eigen::VectorXd sol = lu.solve(rhs);
  for (int it = 0; it < kRefinementSteps; ++it) sol += lu.solve(rhs - K * sol);
  if (!sol.allFinite()) return std::nullopt;

  Candidate c;
  c.x = sol.head(n);
  c.nu = sol.segment(n, me);
  c.mu = Eigen::VectorXd::Zero(pb.num_inequalities());
  for (int r = 0; r < ma; ++r) c.mu[active_ineq[r]] = sol[n + me + r];
  c.res = kkt_residuals(pb, c.x, c.nu, c.mu);
  return c;
}

QpSolution finish(Candidate c, QpStatus status, int iterations, bool polished) {
  QpSolution s;
  s.x_star = std::move(c.x);
  s.duals_eq = std::move(c.nu);
  s.duals_ineq = std::move(c.mu);
  s.status = status;
  s.iterations = iterations;
  s.primal_residual = c.res.primal;
  s.dual_residual = c.res.dual;
  s.complementarity = c.res.complementarity;
  s.polished = polished;
  return s;
}

}  // namespace

std::string_view to_string(QpStatus status) {
  switch (status) {
    case QpStatus::kOptimal: return "optimal";
    case QpStatus::kInfeasible: return "infeasible";
    case QpStatus::kUnbounded: return "unbounded";
    case QpStatus::kMaxIterations: return "max_iterations";
  }
  return "unknown";
}

void QpProblem::validate() const {
  const auto n = c.size();
  if (P.rows() != n || P.cols() != n) throw QpInputError("P must be n x n with n = size(c)");
  if (A_eq.rows() != b_eq.size() || (A_eq.rows() > 0 && A_eq.cols() != n)) {
    throw QpInputError("A_eq must be m_e x n with m_e = size(b_eq)");
  }
  if (G.rows() != h_ub.size() || (G.rows() > 0 && G.cols() != n)) {
    throw QpInputError("G must be m_i x n with m_i = size(h_ub)");
  }
  if (!P.allFinite() || !c.allFinite() || !A_eq.allFinite() || !b_eq.allFinite() ||
      !G.allFinite() || !h_ub.allFinite()) {
    throw QpInputError("problem data must be finite");
  }
  if (n == 0) return;
  const double scale = std::max(1.0, P.cwiseAbs().maxCoeff());
  if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw QpInputError("P is not symmetric");
  }
  Eigen::MatrixXd shifted = 0.5 * (P + P.transpose());
  shifted.diagonal().array() += 1e-10;
  if (Eigen::LLT<Eigen::MatrixXd>(shifted).info() != Eigen::Success) {
    throw QpInputError("P is not positive semidefinite");
  }
}

KktResiduals kkt_residuals(const QpProblem& pb, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& duals_eq, const Eigen::VectorXd& duals_ineq) {
  KktResiduals r;
  Eigen::VectorXd grad = pb.P * x + pb.c;
  if (pb.num_equalities() > 0) {
    r.primal = inf_norm(pb.A_eq * x - pb.b_eq);
    grad += pb.A_eq.transpose() * duals_eq;
  }
  r.min_dual_ineq = kInf;
  if (pb.num_inequalities() > 0) {
    const Eigen::VectorXd slack = pb.G * x - pb.h_ub;
    r.primal = std::max(r.primal, std::max(0.0, slack.maxCoeff()));
    grad += pb.G.transpose() * duals_ineq;
    r.complementarity = std::abs(duals_ineq.dot(slack));
    r.min_dual_ineq = duals_ineq.minCoeff();
  }
  r.dual = inf_norm(grad);
  return r;
}

QpSolution solve(const QpProblem& problem, const QpSettings& settings) {
  problem.validate();
  const Workspace w = build_workspace(problem, settings);
  const int n = w.n;
  const int m = w.m;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
  if (settings.warm_start) {
    const WarmStart& ws = *settings.warm_start;
    if (ws.x.size() != n || ws.y.size() != m) {
      throw QpInputError("warm start dimensions do not match the problem");
    }
    x = ws.x.cwiseQuotient(w.D);
    y = ws.y.cwiseQuotient(w.E) * w.cost_scale;
  }
  Eigen::VectorXd z = (w.A * x).cwiseMax(w.l).cwiseMin(w.u);

  Eigen::VectorXd rho = w.rho;
  Eigen::LLT<Eigen::MatrixXd> kkt;
  const auto factor = [&] {
    Eigen::MatrixXd K = w.P + w.A.transpose() * rho.asDiagonal() * w.A;
    K.diagonal().array() += settings.sigma;
    kkt.compute(K);
    if (kkt.info() != Eigen::Success) throw QpInputError("ADMM system is not positive definite");
  };
  factor();
  // Rebalances rho from the ratio of scaled primal and dual residuals.
  const auto adapt_rho = [&](const Eigen::VectorXd& xs, const Eigen::VectorXd& zs, const Eigen::VectorXd& ys) {
    if (m == 0) return;
    const Eigen::VectorXd ax = w.A * xs;
    const Eigen::VectorXd px = w.P * xs;
    const Eigen::VectorXd aty = w.A.transpose() * ys;
    const double prim = inf_norm(ax - zs) / std::max({inf_norm(ax), inf_norm(zs), 1e-12});
    const double dual = inf_norm(px + w.q + aty) / std::max({inf_norm(px), inf_norm(aty), inf_norm(w.q), 1e-12});
    if (prim <= 0.0 || dual <= 0.0) return;
    const double ratio = std::sqrt(prim / dual);
    if (ratio < kRhoUpdateFactor && ratio > 1.0 / kRhoUpdateFactor) return;
    for (int i = 0; i < m; ++i) rho[i] = std::clamp(rho[i] * ratio, kRhoMin, kRhoMax * (i < w.me ? kEqualityRhoScale : 1.0));
    factor();
  };

  std::vector<int> last_polish_set;
  bool polish_tried = false;
  // Inequalities whose projection clipped at the bound guess the active set.
  const auto try_polish = [&](const Eigen::VectorXd& zs,
                              const Eigen::VectorXd& ys) -> std::optional<Candidate> {
    std::vector<int> active;
    for (int i = w.me; i < m; ++i) {
      if (w.u[i] - zs[i] < ys[i]) active.push_back(i - w.me);
    }
    if (polish_tried && active == last_polish_set) return std::nullopt;
    polish_tried = true;
    last_polish_set = active;
    auto cand = polish(problem, active);
    if (cand && acceptable(cand->res, settings)) return cand;
    return std::nullopt;
  };

  for (int iter = 1; iter <= settings.max_iter; ++iter) {
    const Eigen::VectorXd x_prev = x;
    const Eigen::VectorXd y_prev = y;
    const Eigen::VectorXd rhs =
        settings.sigma * x - w.q + w.A.transpose() * (rho.cwiseProduct(z) - y);
    const Eigen::VectorXd x_tilde = kkt.solve(rhs);
    const Eigen::VectorXd z_tilde = w.A * x_tilde;
    x = settings.alpha * x_tilde + (1.0 - settings.alpha) * x_prev;
    const Eigen::VectorXd z_relaxed = settings.alpha * z_tilde + (1.0 - settings.alpha) * z;
    z = (z_relaxed + y.cwiseQuotient(rho)).cwiseMax(w.l).cwiseMin(w.u);
    y = y + rho.cwiseProduct(z_relaxed - z);

    Candidate cand = unscale(problem, w, x, y);
    if (acceptable(cand.res, settings)) {
      if (settings.polish) {
        if (auto p = try_polish(z, y)) return finish(std::move(*p), QpStatus::kOptimal, iter, true);
      }
      return finish(std::move(cand), QpStatus::kOptimal, iter, false);
    }
    if (settings.polish && iter % kPolishInterval == 0) {
      if (auto p = try_polish(z, y)) return finish(std::move(*p), QpStatus::kOptimal, iter, true);
    }

    // Primal infeasibility certificate from the dual increment.
    const Eigen::VectorXd dy = y - y_prev;
    const double dy_norm = inf_norm(w.E.cwiseProduct(dy));
    if (m > 0 && dy_norm > 1e-12) {
      const double eps = settings.tol_infeasible * dy_norm;
      bool certificate = inf_norm(w.D.cwiseProduct(w.A.transpose() * dy)) <= eps;
      double support = 0.0;
      for (int i = 0; certificate && i < m; ++i) {
        if (dy[i] > 0.0) {
          if (std::isfinite(w.u[i])) {
            support += w.u[i] * dy[i];
          } else if (w.E[i] * dy[i] > eps) {
            certificate = false;
          }
        } else if (dy[i] < 0.0) {
          if (std::isfinite(w.l[i])) {
            support += w.l[i] * dy[i];
          } else if (-w.E[i] * dy[i] > eps) {
            certificate = false;
          }
        }
      }
      if (certificate && support < -eps) {
        return finish(std::move(cand), QpStatus::kInfeasible, iter, false);
      }
    }
    // Dual infeasibility certificate from the primal increment.
    const Eigen::VectorXd dx = x - x_prev;
    const double dx_norm = inf_norm(w.D.cwiseProduct(dx));
    if (dx_norm > 1e-12) {
      const double eps = settings.tol_infeasible * dx_norm;
      bool certificate = inf_norm(w.D.cwiseProduct(w.P * dx)) <= eps * w.cost_scale &&
                         w.q.dot(dx) < -eps * w.cost_scale;
      const Eigen::VectorXd adx = w.A * dx;
      for (int i = 0; certificate && i < m; ++i) {
        const double v = adx[i] / w.E[i];
        if (std::isfinite(w.u[i]) && v > eps) certificate = false;
        if (std::isfinite(w.l[i]) && v < -eps) certificate = false;
      }
      if (certificate) return finish(std::move(cand), QpStatus::kUnbounded, iter, false);
    }
    if (iter % kRhoUpdateInterval == 0) adapt_rho(x, z, y);
  }

  Candidate last = unscale(problem, w, x, y);
  if (settings.polish) {
    polish_tried = false;
    if (auto p = try_polish(z, y)) {
      return finish(std::move(*p), QpStatus::kOptimal, settings.max_iter, true);
    }
  }
  return finish(std::move(last), QpStatus::kMaxIterations, settings.max_iter, false);
}

WarmStart warm_start_from(const QpSolution& previous) {
  WarmStart ws;
  ws.x = previous.x_star;
  ws.y.resize(previous.duals_eq.size() + previous.duals_ineq.size());
  ws.y << previous.duals_eq, previous.duals_ineq;
  return ws;
}

}  // namespace legsafe::qp

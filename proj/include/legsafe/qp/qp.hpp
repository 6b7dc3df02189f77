#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string_view>

namespace legsafe::qp {

class QpInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// minimize 1/2 x'Px + c'x  subject to  A_eq x = b_eq,  G x <= h_ub.
struct QpProblem {
  Eigen::MatrixXd P;
  Eigen::VectorXd c;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd G;
  Eigen::VectorXd h_ub;

  int num_variables() const { return static_cast<int>(c.size()); }
  int num_equalities() const { return static_cast<int>(b_eq.size()); }
  int num_inequalities() const { return static_cast<int>(h_ub.size()); }

  double objective(const Eigen::VectorXd& x) const { return 0.5 * x.dot(P * x) + c.dot(x); }

  /// Throws QpInputError on inconsistent dimensions, non-finite data, an
  /// asymmetric P (beyond 1e-9) or a P that is not positive semidefinite.
  void validate() const;
};

enum class QpStatus { kOptimal, kInfeasible, kUnbounded, kMaxIterations };

std::string_view to_string(QpStatus status);

struct QpSolution {
  Eigen::VectorXd x_star;
  Eigen::VectorXd duals_eq;
  Eigen::VectorXd duals_ineq;
  QpStatus status = QpStatus::kMaxIterations;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double complementarity = 0.0;
  bool polished = false;
};

/// Primal point plus stacked duals [equalities; inequalities].
struct WarmStart {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
};

struct QpSettings {
  double tol_feas = 1e-6;
  double tol_opt = 1e-6;
  int max_iter = 4000;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  bool polish = true;
  int scaling_iterations = 10;
  /// Tolerance for the primal/dual infeasibility certificates.
  double tol_infeasible = 1e-5;
  std::optional<WarmStart> warm_start;
};

/// Dense operator-splitting (ADMM) solver with Ruiz equilibration and
/// active-set polishing. Status is kOptimal only when the returned point meets
/// the KKT conditions at the requested tolerances.
QpSolution solve(const QpProblem& problem, const QpSettings& settings = {});

/// Warm start for the next solve of a same-shaped problem.
WarmStart warm_start_from(const QpSolution& previous);

struct KktResiduals {
  double primal = 0.0;           // max(|A_eq x - b|_inf, max(Gx - h)_+)
  double dual = 0.0;             // |Px + c + A_eq'nu + G'mu|_inf
  double complementarity = 0.0;  // |mu'(Gx - h)|
  double min_dual_ineq = 0.0;    // min(mu), +inf when there are no inequalities
};

KktResiduals kkt_residuals(const QpProblem& problem, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& duals_eq, const Eigen::VectorXd& duals_ineq);

/// Plain-text matrix dump for offline inspection; read_problem parses it back.
void write_problem(std::ostream& out, const QpProblem& problem);
QpProblem read_problem(std::istream& in);

}  // namespace legsafe::qp

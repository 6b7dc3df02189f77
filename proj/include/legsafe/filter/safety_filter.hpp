#pragma once

#include "legsafe/filter/clearance.hpp"
#include "legsafe/model/dynamics.hpp"
#include "legsafe/model/robot_model.hpp"
#include "legsafe/qp/qp.hpp"

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <vector>

namespace legsafe::filter {

/// Raised when a filter operation is called outside its contract, e.g. an
/// ECBF row requested for a stance foot.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct FilterConfig {
  double mu = 0.8;
  double alpha1 = 20.0;
  double alpha2 = 20.0;
  double gait_period = 0.6;
  /// One profile per model foot, or empty for no clearance rows.
  std::vector<FootClearance> obstacle_profile;
  bool cbf_enabled = true;
  bool friction_enabled = true;
  bool torque_limits_enabled = true;
  double min_normal_force = 1.0;
  qp::QpSettings qp;

  /// Throws std::invalid_argument when an invariant is broken.
  void validate() const;
};

/// mu / sqrt(2): the coefficient of the square pyramid inscribed in the cone.
double effective_friction(double mu);

/// Column layout of X = (vdot, u, lambda).
struct DecisionLayout {
  int nv = 0;
  int nu = 0;
  int nlambda = 0;

  int size() const { return nv + nu + nlambda; }
  int vdot_offset() const { return 0; }
  int u_offset() const { return nv; }
  int lambda_offset() const { return nv + nu; }
};

/// A block of inequality rows G x <= h.
struct InequalityRows {
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
};

/// h = p_z(q) - z(phi) for foot j.
double barrier_value(const model::RobotModel& model, const model::RobotState& state, int foot,
                     const FilterConfig& config, double phi);

/// Relative-degree-1 barrier b with db/dt = a' vdot + d and class-K function
/// alpha(b) = gamma b; the row encodes db/dt >= -gamma b as
/// -a' vdot <= d + gamma b. `a` has length nv and the row spans X.
struct LinearCbfRow {
  Eigen::RowVectorXd g;
  double h_ub = 0.0;
};
LinearCbfRow linear_cbf_row(const DecisionLayout& layout, const Eigen::RowVectorXd& a, double drift,
                            double value, double gamma);

struct EcbfRow {
  Eigen::RowVectorXd g;  // over X
  double h_ub = 0.0;
  double h = 0.0;
  double h_dot = 0.0;
  double h_e = 0.0;
};

/// Clearance row for a swing foot:
///   alpha2 h_e + (Jdot v + J vdot)_z - z'' phi_dot^2 + alpha1 (pdot_z - z' phi_dot) >= 0
/// rearranged to -J_z vdot <= alpha2 h_e + (Jdot v)_z - z'' phi_dot^2 + alpha1 hdot.
EcbfRow ecbf_row(const model::RobotModel& model, const model::Kinematics& kin,
                 const model::RobotState& state, const model::ContactSet& contacts, int foot,
                 const FilterConfig& config, const PhaseState& ph, const DecisionLayout& layout);
EcbfRow ecbf_row(const model::RobotModel& model, const model::RobotState& state,
                 const model::ContactSet& contacts, int foot, const FilterConfig& config,
                 const PhaseState& ph);

/// Five rows per stance foot over the lambda block (3 n_c columns):
/// -lz <= -lz_min, +-lx <= mu~ lz, +-ly <= mu~ lz.
InequalityRows friction_rows(const model::ContactSet& contacts, double mu,
                             double min_normal_force = 1.0);

/// Assembled ID-CBF-QP together with the bookkeeping needed to read it back.
struct AssembledQp {
  qp::QpProblem problem;
  DecisionLayout layout;
  PhaseState phase;
  /// Model foot index of each ECBF row and its first row in G.
  std::vector<int> ecbf_feet;
  int ecbf_row_offset = 0;
  std::vector<EcbfRow> ecbf_rows;
  int friction_row_offset = 0;
  int friction_row_count = 0;
};

AssembledQp assemble(const model::RobotModel& model, const model::RobotState& state,
                     const model::ContactSet& contacts, const Eigen::VectorXd& u_nominal,
                     const FilterConfig& config);

struct FilterDecision {
  Eigen::VectorXd u_filtered;
  Eigen::VectorXd v_dot;   // NaN unless status is optimal
  Eigen::VectorXd lambda;  // 3 n_c, NaN unless status is optimal
  qp::QpStatus status = qp::QpStatus::kMaxIterations;
  int iterations = 0;
  bool fallback = false;
  /// Barrier value per model foot; NaN for stance feet.
  Eigen::VectorXd h_values;
  /// ECBF row slack (h_ub - g x) per model foot; NaN when no row was built.
  Eigen::VectorXd ecbf_slack;
  /// ECBF right-hand side per model foot; NaN when no row was built.
  Eigen::VectorXd ecbf_rhs;
  double interference = 0.0;
  qp::QpSolution solution;
  /// KKT residuals of the returned point on the unscaled problem.
  qp::KktResiduals kkt;
};

/// Solves the assembled problem. When the status is not optimal, u_filtered
/// is `fallback_u` if given, else u_nominal clipped to the torque limits, and
/// the decision is flagged.
FilterDecision filter_step(const model::RobotModel& model, const model::RobotState& state,
                           const model::ContactSet& contacts, const Eigen::VectorXd& u_nominal,
                           const FilterConfig& config,
                           const std::optional<qp::WarmStart>& warm_start = std::nullopt,
                           const std::optional<Eigen::VectorXd>& fallback_u = std::nullopt);

/// Control-loop wrapper that carries the warm start and the last optimal
/// command across steps.
class SafetyFilter {
 public:
  SafetyFilter(const model::RobotModel& model, FilterConfig config);

  FilterDecision step(const model::RobotState& state, const model::ContactSet& contacts,
                      const Eigen::VectorXd& u_nominal);

  FilterConfig& config() { return config_; }
  const FilterConfig& config() const { return config_; }
  void reset();

 private:
  const model::RobotModel* model_;
  FilterConfig config_;
  std::optional<qp::WarmStart> warm_;
  std::optional<Eigen::VectorXd> last_u_;
  std::optional<model::ContactSet> last_contacts_;
};

/// Accelerations and contact forces implied by a torque under rigid stance
/// contact: solves the equality part of the QP with u fixed.
struct ContactPrediction {
  Eigen::VectorXd v_dot;
  Eigen::VectorXd lambda;
};
ContactPrediction predict_contact_forces(const model::RobotModel& model,
                                         const model::RobotState& state,
                                         const model::ContactSet& contacts,
                                         const Eigen::VectorXd& u);

/// First-order low-pass for feeding friction estimates into FilterConfig::mu.
class FrictionSmoother {
 public:
  explicit FrictionSmoother(double initial_mu, double time_constant = 0.5);
  double update(double measurement, double dt);
  double value() const { return value_; }

 private:
  double value_;
  double tau_;
};

}  // namespace legsafe::filter

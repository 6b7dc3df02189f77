#include "legsafe/filter/safety_filter.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace legsafe::filter {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

DecisionLayout layout_for(const model::RobotModel& model, const model::ContactSet& contacts) {
  return DecisionLayout{model.nv(), model.nva(), 3 * contacts.size()};
}

}  // namespace

void FilterConfig::validate() const {
  auto positive = [](double x, const char* what) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      throw std::invalid_argument(std::string(what) + " must be positive and finite");
    }
  };
  positive(mu, "mu");
  positive(alpha1, "alpha1");
  positive(alpha2, "alpha2");
  positive(gait_period, "gait_period");
  if (!(min_normal_force >= 0.0)) throw std::invalid_argument("min_normal_force must be >= 0");
  for (const auto& p : obstacle_profile) {
    if (!(p.window_length > 0.0 && p.window_length <= 1.0)) {
      throw std::invalid_argument("obstacle window length must lie in (0, 1]");
    }
    for (double s : {0.0, 0.5, 1.0}) {
      if (!std::isfinite(p.profile.value(s)) || !std::isfinite(p.profile.derivative(s)) ||
          !std::isfinite(p.profile.second_derivative(s))) {
        throw std::invalid_argument("obstacle profile is not finite on [0, 1]");
      }
    }
  }
}

double effective_friction(double mu) { return mu / std::sqrt(2.0); }

double barrier_value(const model::RobotModel& model, const model::RobotState& state, int foot,
                     const FilterConfig& config, double phi) {
  if (foot < 0 || foot >= model.num_feet()) throw model::ModelMismatchError("foot index out of range");
  const double z = config.obstacle_profile.empty()
                       ? 0.0
                       : config.obstacle_profile.at(static_cast<std::size_t>(foot)).evaluate(phi).z;
  return model::foot_position(model, state, foot).z() - z;
}

LinearCbfRow linear_cbf_row(const DecisionLayout& layout, const Eigen::RowVectorXd& a, double drift,
                            double value, double gamma) {
  if (a.size() != layout.nv) throw model::ModelMismatchError("barrier gradient has wrong length");
  LinearCbfRow row;
  row.g = Eigen::RowVectorXd::Zero(layout.size());
  row.g.segment(layout.vdot_offset(), layout.nv) = -a;
  row.h_ub = drift + gamma * value;
  return row;
}

EcbfRow ecbf_row(const model::RobotModel& model, const model::Kinematics& kin,
                 const model::RobotState& state, const model::ContactSet& contacts, int foot,
                 const FilterConfig& config, const PhaseState& ph, const DecisionLayout& layout) {
  if (contacts.contains(foot)) {
    throw ContractError("ECBF row requested for stance foot " + std::to_string(foot));
  }
  if (foot < 0 || foot >= model.num_feet()) throw model::ModelMismatchError("foot index out of range");
  (void)state;
  const ClearanceSample zs =
      config.obstacle_profile.empty()
          ? ClearanceSample{}
          : config.obstacle_profile.at(static_cast<std::size_t>(foot)).evaluate(ph.phi);
  const Eigen::MatrixXd J = model::foot_jacobian(model, kin, foot);
  const Eigen::Vector3d p = model::foot_position(model, kin, foot);
  const Eigen::Vector3d pdot = model::foot_velocity(model, kin, foot);
  const Eigen::Vector3d jdot_v = model::foot_jacobian_dot_v(model, kin, foot);

  EcbfRow row;
  row.h = p.z() - zs.z;
  row.h_dot = pdot.z() - zs.dz * ph.phi_dot;
  row.h_e = row.h_dot + config.alpha1 * row.h;
  // The second-order form is a first-order CBF on h_e with gain alpha2.
  const double drift = jdot_v.z() - zs.ddz * ph.phi_dot * ph.phi_dot - zs.dz * ph.phi_ddot +
                       config.alpha1 * row.h_dot;
  const LinearCbfRow lin = linear_cbf_row(layout, J.row(2), drift, row.h_e, config.alpha2);
  row.g = lin.g;
  row.h_ub = lin.h_ub;
  return row;
}

EcbfRow ecbf_row(const model::RobotModel& model, const model::RobotState& state,
                 const model::ContactSet& contacts, int foot, const FilterConfig& config,
                 const PhaseState& ph) {
  const auto kin = model::compute_kinematics(model, state);
  return ecbf_row(model, kin, state, contacts, foot, config, ph, layout_for(model, contacts));
}

InequalityRows friction_rows(const model::ContactSet& contacts, double mu, double min_normal_force) {
  const int nc = contacts.size();
  const double mt = effective_friction(mu);
  InequalityRows rows;
  rows.G = Eigen::MatrixXd::Zero(5 * nc, 3 * nc);
  rows.h = Eigen::VectorXd::Zero(5 * nc);
  for (int i = 0; i < nc; ++i) {
    const int r = 5 * i;
    const int c = 3 * i;
    rows.G(r, c + 2) = -1.0;
    rows.h[r] = -min_normal_force;
    for (int axis = 0; axis < 2; ++axis) {
      for (int sign = 0; sign < 2; ++sign) {
        const int rr = r + 1 + 2 * axis + sign;
        rows.G(rr, c + axis) = sign == 0 ? 1.0 : -1.0;
        rows.G(rr, c + 2) = -mt;
      }
    }
  }
  return rows;
}

AssembledQp assemble(const model::RobotModel& model, const model::RobotState& state,
                     const model::ContactSet& contacts, const Eigen::VectorXd& u_nominal,
                     const FilterConfig& config) {
  model::validate_state(model, state);
  if (u_nominal.size() != model.nva()) throw model::ModelMismatchError("u_nominal has wrong length");
  for (int f : contacts.feet()) {
    if (f < 0 || f >= model.num_feet()) throw model::ModelMismatchError("contact foot out of range");
  }
  if (!config.obstacle_profile.empty() &&
      static_cast<int>(config.obstacle_profile.size()) != model.num_feet()) {
    throw model::ModelMismatchError("obstacle profile needs one entry per foot");
  }

  AssembledQp out;
  const DecisionLayout L = layout_for(model, contacts);
  out.layout = L;
  out.phase = phase(state.t, config.gait_period);
  const int n = L.size();
  const int nv = L.nv;
  const int nc3 = L.nlambda;

  const auto kin = model::compute_kinematics(model, state);
  const Eigen::MatrixXd M = model::mass_matrix(model, kin);
  const Eigen::VectorXd H = model::nonlinear_effects(model, kin);
  const Eigen::MatrixXd B = model.selection_matrix();
  const Eigen::MatrixXd Jc = model::contact_jacobian(model, kin, contacts);
  const Eigen::VectorXd jdv = model::jacobian_dot_v(model, kin, contacts);

  auto& pb = out.problem;
  pb.P = Eigen::MatrixXd::Zero(n, n);
  pb.P.block(L.u_offset(), L.u_offset(), L.nu, L.nu).setIdentity();
  pb.c = Eigen::VectorXd::Zero(n);
  pb.c.segment(L.u_offset(), L.nu) = -u_nominal;

  pb.A_eq = Eigen::MatrixXd::Zero(nv + nc3, n);
  pb.b_eq = Eigen::VectorXd::Zero(nv + nc3);
  pb.A_eq.block(0, L.vdot_offset(), nv, nv) = M;
  pb.A_eq.block(0, L.u_offset(), nv, L.nu) = -B;
  if (nc3 > 0) pb.A_eq.block(0, L.lambda_offset(), nv, nc3) = -Jc.transpose();
  pb.b_eq.head(nv) = -H;
  if (nc3 > 0) {
    pb.A_eq.block(nv, L.vdot_offset(), nc3, nv) = Jc;
    pb.b_eq.tail(nc3) = -jdv;
  }

  std::vector<Eigen::RowVectorXd> grows;
  std::vector<double> hrows;
  if (config.friction_enabled && !contacts.empty()) {
    const auto fr = friction_rows(contacts, config.mu, config.min_normal_force);
    out.friction_row_offset = static_cast<int>(grows.size());
    out.friction_row_count = static_cast<int>(fr.h.size());
    for (int r = 0; r < fr.G.rows(); ++r) {
      Eigen::RowVectorXd g = Eigen::RowVectorXd::Zero(n);
      g.segment(L.lambda_offset(), nc3) = fr.G.row(r);
      grows.push_back(std::move(g));
      hrows.push_back(fr.h[r]);
    }
  }
  if (config.cbf_enabled && !config.obstacle_profile.empty()) {
    out.ecbf_row_offset = static_cast<int>(grows.size());
    for (int f = 0; f < model.num_feet(); ++f) {
      if (contacts.contains(f)) continue;
      EcbfRow row = ecbf_row(model, kin, state, contacts, f, config, out.phase, L);
      grows.push_back(row.g);
      hrows.push_back(row.h_ub);
      out.ecbf_feet.push_back(f);
      out.ecbf_rows.push_back(std::move(row));
    }
  }
  if (config.torque_limits_enabled) {
    const Eigen::VectorXd& tmax = model.torque_limits();
    for (int a = 0; a < L.nu; ++a) {
      for (double sign : {1.0, -1.0}) {
        Eigen::RowVectorXd g = Eigen::RowVectorXd::Zero(n);
        g[L.u_offset() + a] = sign;
        grows.push_back(std::move(g));
        hrows.push_back(tmax[a]);
      }
    }
  }
  const int mi = static_cast<int>(grows.size());
  pb.G.resize(mi, n);
  pb.h_ub.resize(mi);
  for (int r = 0; r < mi; ++r) {
    pb.G.row(r) = grows[static_cast<std::size_t>(r)];
    pb.h_ub[r] = hrows[static_cast<std::size_t>(r)];
  }
  return out;
}

FilterDecision filter_step(const model::RobotModel& model, const model::RobotState& state,
                           const model::ContactSet& contacts, const Eigen::VectorXd& u_nominal,
                           const FilterConfig& config, const std::optional<qp::WarmStart>& warm_start,
                           const std::optional<Eigen::VectorXd>& fallback_u) {
  config.validate();
  const AssembledQp as = assemble(model, state, contacts, u_nominal, config);
  const auto& pb = as.problem;
  const auto& L = as.layout;

  qp::QpSettings settings = config.qp;
  settings.warm_start.reset();
  if (warm_start && warm_start->x.size() == pb.num_variables() &&
      warm_start->y.size() == pb.num_equalities() + pb.num_inequalities()) {
    settings.warm_start = warm_start;
  }

  FilterDecision d;
  d.solution = qp::solve(pb, settings);
  d.status = d.solution.status;
  d.iterations = d.solution.iterations;

  const int nf = model.num_feet();
  d.h_values = Eigen::VectorXd::Constant(nf, kNaN);
  d.ecbf_slack = Eigen::VectorXd::Constant(nf, kNaN);
  d.ecbf_rhs = Eigen::VectorXd::Constant(nf, kNaN);
  if (!config.obstacle_profile.empty()) {
    for (int f = 0; f < nf; ++f) {
      if (!contacts.contains(f)) d.h_values[f] = barrier_value(model, state, f, config, as.phase.phi);
    }
  }

  if (d.status == qp::QpStatus::kOptimal) {
    const auto& x = d.solution.x_star;
    d.kkt = qp::kkt_residuals(pb, x, d.solution.duals_eq, d.solution.duals_ineq);
    d.v_dot = x.segment(L.vdot_offset(), L.nv);
    d.u_filtered = x.segment(L.u_offset(), L.nu);
    d.lambda = x.segment(L.lambda_offset(), L.nlambda);
    for (std::size_t k = 0; k < as.ecbf_feet.size(); ++k) {
      const int f = as.ecbf_feet[k];
      const double gx = as.ecbf_rows[k].g.dot(x);
      d.ecbf_rhs[f] = as.ecbf_rows[k].h_ub;
      d.ecbf_slack[f] = as.ecbf_rows[k].h_ub - gx;
    }
  } else {
    d.fallback = true;
    d.v_dot = Eigen::VectorXd::Constant(L.nv, kNaN);
    d.lambda = Eigen::VectorXd::Constant(L.nlambda, kNaN);
    if (fallback_u && fallback_u->size() == L.nu) {
      d.u_filtered = *fallback_u;
    } else {
      const Eigen::VectorXd& tmax = model.torque_limits();
      d.u_filtered = u_nominal.cwiseMax(-tmax).cwiseMin(tmax);
    }
    for (std::size_t k = 0; k < as.ecbf_feet.size(); ++k) {
      d.ecbf_rhs[as.ecbf_feet[k]] = as.ecbf_rows[k].h_ub;
    }
  }
  d.interference = (d.u_filtered - u_nominal).norm();
  return d;
}

SafetyFilter::SafetyFilter(const model::RobotModel& model, FilterConfig config)
    : model_(&model), config_(std::move(config)) {
  config_.validate();
}

void SafetyFilter::reset() {
  warm_.reset();
  last_u_.reset();
  last_contacts_.reset();
}

FilterDecision SafetyFilter::step(const model::RobotState& state, const model::ContactSet& contacts,
                                  const Eigen::VectorXd& u_nominal) {
  std::optional<qp::WarmStart> ws;
  if (last_contacts_ && *last_contacts_ == contacts) ws = warm_;
  FilterDecision d = filter_step(*model_, state, contacts, u_nominal, config_, ws, last_u_);
  if (d.status == qp::QpStatus::kOptimal) {
    warm_ = qp::warm_start_from(d.solution);
    last_u_ = d.u_filtered;
    last_contacts_ = contacts;
  }
  return d;
}

ContactPrediction predict_contact_forces(const model::RobotModel& model,
                                         const model::RobotState& state,
                                         const model::ContactSet& contacts,
                                         const Eigen::VectorXd& u) {
  const auto kin = model::compute_kinematics(model, state);
  const Eigen::MatrixXd M = model::mass_matrix(model, kin);
  const Eigen::VectorXd H = model::nonlinear_effects(model, kin);
  const Eigen::MatrixXd Jc = model::contact_jacobian(model, kin, contacts);
  const Eigen::VectorXd jdv = model::jacobian_dot_v(model, kin, contacts);
  const int nv = model.nv();
  const int m = static_cast<int>(Jc.rows());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nv + m, nv + m);
  Eigen::VectorXd rhs(nv + m);
  K.topLeftCorner(nv, nv) = M;
  K.topRightCorner(nv, m) = -Jc.transpose();
  K.bottomLeftCorner(m, nv) = Jc;
  rhs.head(nv) = model.selection_matrix() * u - H;
  rhs.tail(m) = -jdv;
  const Eigen::VectorXd sol = K.fullPivLu().solve(rhs);
  return ContactPrediction{sol.head(nv), sol.tail(m)};
}

FrictionSmoother::FrictionSmoother(double initial_mu, double time_constant)
    : value_(initial_mu), tau_(time_constant) {
  if (!(time_constant >= 0.0)) throw std::invalid_argument("time constant must be >= 0");
}

double FrictionSmoother::update(double measurement, double dt) {
  const double a = tau_ > 0.0 ? 1.0 - std::exp(-dt / tau_) : 1.0;
  value_ += a * (measurement - value_);
  return value_;
}

}  // namespace legsafe::filter

#include "legsafe/sim/simulator.hpp"

#include <cmath>
#include <stdexcept>

namespace legsafe::sim {

void Terrain::validate() const {
  if (!(mu_true > 0.0) || !std::isfinite(mu_true)) throw std::invalid_argument("terrain mu must be positive");
  if (!std::isfinite(offset) || !std::isfinite(amplitude)) throw std::invalid_argument("terrain height must be finite");
  if (type == TerrainType::kWaves && !(wavelength > 0.0)) {
    throw std::invalid_argument("terrain wavelength must be positive");
  }
}

double Terrain::height(double x, double y) const {
  if (type == TerrainType::kFlat) return offset;
  const double k = 2.0 * M_PI / wavelength;
  return offset + amplitude * std::sin(k * x) * std::sin(k * y);
}

Eigen::Vector3d Terrain::normal(double x, double y) const {
  if (type == TerrainType::kFlat) return Eigen::Vector3d::UnitZ();
  const double k = 2.0 * M_PI / wavelength;
  const double dhdx = amplitude * k * std::cos(k * x) * std::sin(k * y);
  const double dhdy = amplitude * k * std::sin(k * x) * std::cos(k * y);
  return Eigen::Vector3d(-dhdx, -dhdy, 1.0).normalized();
}

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("sim dt must be positive");
  if (!(stiffness > 0.0) || !(damping > 0.0)) throw std::invalid_argument("contact stiffness and damping must be positive");
  if (!(damping_depth > 0.0)) throw std::invalid_argument("damping depth must be positive");
  if (!(v_eps > 0.0)) throw std::invalid_argument("v_eps must be positive");
  if (!(duration >= 0.0)) throw std::invalid_argument("duration must be >= 0");
}

FootContact foot_contact(const Eigen::Vector3d& p, const Eigen::Vector3d& v, const Terrain& terrain,
                         const SimConfig& cfg) {
  FootContact out;
  const Eigen::Vector3d n = terrain.normal(p.x(), p.y());
  const Eigen::Vector3d ground(p.x(), p.y(), terrain.height(p.x(), p.y()));
  const double delta = n.dot(ground - p);
  out.penetration = delta;
  if (delta <= 0.0) return out;
  const double ddelta = -n.dot(v);
  const double ramp = std::min(1.0, delta / cfg.damping_depth);
  const double fn = cfg.stiffness * delta + cfg.damping * ddelta * ramp;
  if (fn <= 0.0) return out;
  const Eigen::Matrix3d nn = n * n.transpose();
  const Eigen::Matrix3d tangent_proj = Eigen::Matrix3d::Identity() - nn;
  const Eigen::Vector3d vt = tangent_proj * v;
  const double speed = vt.norm();
  const double mu_fn = terrain.mu_true * fn;

  out.force = fn * n;
  out.d_velocity = -cfg.damping * ramp * nn;
  out.d_position = -cfg.stiffness * nn;
  if (speed > cfg.v_eps) {
    const Eigen::Vector3d that = vt / speed;
    out.force -= mu_fn * that;
    out.d_velocity -= (mu_fn / speed) * (tangent_proj - that * that.transpose());
  } else {
    out.force -= (mu_fn / cfg.v_eps) * vt;
    out.d_velocity -= (mu_fn / cfg.v_eps) * tangent_proj;
  }
  return out;
}

std::vector<Eigen::Vector3d> contact_forces(const model::RobotModel& model,
                                            const model::RobotState& state, const Terrain& terrain,
                                            const SimConfig& config) {
  const auto kin = model::compute_kinematics(model, state);
  std::vector<Eigen::Vector3d> out;
  out.reserve(static_cast<std::size_t>(model.num_feet()));
  for (int f = 0; f < model.num_feet(); ++f) {
    out.push_back(foot_contact(model::foot_position(model, kin, f), model::foot_velocity(model, kin, f),
                               terrain, config)
                      .force);
  }
  return out;
}

namespace {

/// One touching foot over a step. The normal force is linear in the new
/// velocity; the friction magnitude is frozen at the start-of-step normal force.
struct ActiveFoot {
  int foot;
  Eigen::MatrixXd J;
  Eigen::Vector3d n;
  Eigen::Matrix3d P;  // tangent projector
  double friction_bound;
  Eigen::Vector3d normal_force0;
  Eigen::Matrix3d D;  // normal force derivative wrt foot velocity
  Eigen::Matrix3d K;  // normal force derivative wrt foot position
};

/// Smoothed |x| on the tangent plane: quadratic below eps, linear above.
double huber(const Eigen::Vector3d& x, double eps) {
  const double r = x.norm();
  return r >= eps ? r - 0.5 * eps : 0.5 * r * r / eps;
}

}  // namespace

model::RobotState step(const model::RobotModel& model, const model::RobotState& state,
                       const Eigen::VectorXd& u, const Terrain& terrain, const SimConfig& config,
                       std::vector<Eigen::Vector3d>* applied) {
  if (u.size() != model.nva()) throw model::ModelMismatchError("torque vector has wrong length");
  const double dt = config.dt;
  const double eps = config.v_eps;
  const auto kin = model::compute_kinematics(model, state);
  const Eigen::MatrixXd M = model::mass_matrix(model, kin);
  const Eigen::VectorXd tau =
      model.selection_matrix() * u - model::nonlinear_effects(model, kin, config.gravity);

  std::vector<ActiveFoot> active;
  for (int f = 0; f < model.num_feet(); ++f) {
    const Eigen::Vector3d p = model::foot_position(model, kin, f);
    const Eigen::Vector3d v = model::foot_velocity(model, kin, f);
    const FootContact c = foot_contact(p, v, terrain, config);
    if (c.force.isZero(0.0)) continue;
    const Eigen::Vector3d n = terrain.normal(p.x(), p.y());
    const Eigen::Matrix3d nn = n * n.transpose();
    const double fn = c.force.dot(n);
    active.push_back({f, model::foot_jacobian(model, kin, f), n, Eigen::Matrix3d::Identity() - nn,
                      terrain.mu_true * fn, fn * n, nn * c.d_velocity * nn, c.d_position});
  }

  // The new velocity w minimises
  //   1/2 (w - v)' A (w - v) - dt b' (w - v) + dt sum_f mu fn huber(P J_f w)
  // whose stationarity condition is the implicit step with regularized
  // Coulomb friction evaluated at w.
  Eigen::MatrixXd A = M;
  Eigen::VectorXd b = tau;
  for (const auto& a : active) {
    A.noalias() -= dt * a.J.transpose() * (a.D + dt * a.K) * a.J;
    b.noalias() += a.J.transpose() * (a.normal_force0 + dt * a.K * (a.J * state.v));
  }
  auto objective = [&](const Eigen::VectorXd& w) {
    const Eigen::VectorXd d = w - state.v;
    double val = 0.5 * d.dot(A * d) - dt * b.dot(d);
    for (const auto& a : active) val += dt * a.friction_bound * huber(a.P * (a.J * w), eps);
    return val;
  };

  Eigen::VectorXd w = state.v;
  double fw = objective(w);
  for (int it = 0; it < 30; ++it) {
    Eigen::VectorXd grad = A * (w - state.v) - dt * b;
    Eigen::MatrixXd H = A;
    for (const auto& a : active) {
      const Eigen::Vector3d vt = a.P * (a.J * w);
      const double r = vt.norm();
      Eigen::Matrix3d hess;
      Eigen::Vector3d g;
      if (r >= eps) {
        const Eigen::Vector3d that = vt / r;
        g = that;
        // The exact radial curvature is zero; a small positive term damps
        // Newton steps that would jump across the stick region.
        hess = (a.P - that * that.transpose()) / r + 0.1 * that * that.transpose() / r;
      } else {
        g = vt / eps;
        hess = a.P / eps;
      }
      grad.noalias() += dt * a.friction_bound * a.J.transpose() * g;
      H.noalias() += dt * a.friction_bound * a.J.transpose() * hess * a.J;
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() != Eigen::Success) throw std::runtime_error("implicit contact system is not positive definite");
    const Eigen::VectorXd dir = -llt.solve(grad);
    const double slope = grad.dot(dir);
    if (-slope <= 1e-20 * (1.0 + std::abs(fw))) break;
    double t = 1.0;
    Eigen::VectorXd cand = w + dir;
    double fc = objective(cand);
    while (fc > fw + 1e-4 * t * slope && t > 1e-8) {
      t *= 0.5;
      cand = w + t * dir;
      fc = objective(cand);
    }
    if (!(fc <= fw)) break;
    const double change = (cand - w).lpNorm<Eigen::Infinity>();
    w = cand;
    fw = fc;
    if (change <= 1e-12) break;
  }

  model::RobotState next;
  next.v = w;
  next.q = model::integrate_configuration(model, state.q, next.v, dt);
  next.t = state.t + dt;

  if (applied) {
    applied->assign(static_cast<std::size_t>(model.num_feet()), Eigen::Vector3d::Zero());
    for (const auto& a : active) {
      const Eigen::Vector3d vf = a.J * w;
      const Eigen::Vector3d vt = a.P * vf;
      const Eigen::Vector3d ft = -a.friction_bound * vt / std::max(vt.norm(), eps);
      const Eigen::Vector3d fnrm =
          a.normal_force0 + a.D * (a.J * (w - state.v)) + dt * a.K * vf;
      (*applied)[static_cast<std::size_t>(a.foot)] = fnrm + ft;
    }
  }
  return next;
}

double total_vertical_force(const std::vector<Eigen::Vector3d>& forces) {
  double s = 0.0;
  for (const auto& f : forces) s += f.z();
  return s;
}

}  // namespace legsafe::sim

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include "legsafe/app/bench.hpp"
#include "legsafe/app/config.hpp"
#include "legsafe/app/experiments.hpp"
#include "legsafe/estimator/network.hpp"
#include "legsafe/estimator/training.hpp"
#include "legsafe/model/dynamics.hpp"
#include "legsafe/model/model_io.hpp"
#include "legsafe/sim/scenario.hpp"
#include "qp_oracle.hpp"
#include "test_support.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace legsafe;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string config_path(const std::string& name) { return std::string(LEGSAFE_CONFIG_DIR) + "/" + name; }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string csv_of(const sim::TrajectoryLog& log) {
  std::ostringstream out;
  sim::write_trajectory_csv(out, log);
  return out.str();
}

// Shared with the determinism and KKT checks.
std::optional<app::FrictionDemoResult> g_friction;
std::optional<app::ClearanceDemoResult> g_clearance;

Outcome friction_certification() {
  const auto spec = app::load_scenario(config_path("friction_demo.yaml"));
  const auto start = Clock::now();
  g_friction = app::run_friction_demo(spec);
  const double runtime = seconds_since(start);
  const auto& r = *g_friction;
  const bool mu_ok = std::abs(r.mu - 0.2) < 1e-12;
  const bool pass = mu_ok && r.certified && r.non_optimal_steps == 0 && r.post.samples > 0 &&
                    r.post.max_violation <= 1e-6 && r.pre.samples > 0 && r.pre.max_ratio > 1.1 &&
                    runtime <= 120.0;
  return {pass, fmt::format("mu {:.2f}, post samples {} max violation {:.3g} N, pre max ratio {:.4g}, "
                            "non-optimal {}, runtime {:.1f} s",
                            r.mu, r.post.samples, r.post.max_violation, r.pre.max_ratio, r.non_optimal_steps,
                            runtime)};
}

Outcome grf_consistency() {
  const auto spec = app::load_scenario(config_path("simulate.yaml"));
  const double periods = spec.scenario.duration / spec.gait.schedule.gait_period;
  const auto log = app::run_simulation(spec);
  const auto e = sim::measure_grf_error(log, 0.02);
  const bool flat = spec.terrain.type == sim::TerrainType::kFlat;
  const bool pass = !log.failed && flat && periods >= 10.0 - 1e-9 && e.samples > 0 && e.mae_vertical <= 10.0 &&
                    e.mae_lateral <= 5.0;
  return {pass, fmt::format("{:.1f} periods, {} samples, MAE vertical {:.3f} N lateral {:.3f} N", periods,
                            e.samples, e.mae_vertical, e.mae_lateral)};
}

Outcome ground_clearance() {
  const auto spec = app::load_scenario(config_path("clearance_demo.yaml"));
  g_clearance = app::run_clearance_demo(spec);
  const auto& r = *g_clearance;
  const auto& coeffs = spec.obstacle.kind == app::ObstacleKind::kBump
                           ? filter::PolynomialProfile::bump(spec.obstacle.peak, spec.obstacle.base).coefficients()
                           : spec.obstacle.coefficients;
  const bool quartic = coeffs.size() == 5 && coeffs.back() != 0.0;
  const bool pass = quartic && !r.nominal.log.failed && !r.filtered.log.failed && r.nominal.min_h <= -0.01 &&
                    r.filtered.min_h >= -1e-3 && r.filtered.non_optimal_steps == 0 && r.slack_steps > 0 &&
                    r.max_interference_slack <= 1e-3;
  return {pass, fmt::format("nominal min h {:+.4f} m, filtered min h {:+.5f} m, non-optimal {}, "
                            "{} slack steps with max interference {:.3g} N·m",
                            r.nominal.min_h, r.filtered.min_h, r.filtered.non_optimal_steps, r.slack_steps,
                            r.max_interference_slack)};
}

// Scenario ranges for the invariance suite.
constexpr double kKpRange[2] = {60.0, 90.0};
constexpr double kKdRange[2] = {2.8, 3.5};
constexpr double kStepHeightRange[2] = {0.04, 0.08};
constexpr double kAlphaRange[2] = {10.0, 40.0};
constexpr double kPeakRange[2] = {0.02, 0.06};

Outcome forward_invariance() {
  std::mt19937_64 rng(20240601);
  auto draw = [&](const double (&range)[2]) {
    return std::uniform_real_distribution<double>(range[0], range[1])(rng);
  };
  int optimal_runs = 0;
  int violations = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 20; ++k) {
    const std::vector<std::string> overrides{
        fmt::format("gait.kp={:.17g}", draw(kKpRange)),
        fmt::format("gait.kd={:.17g}", draw(kKdRange)),
        fmt::format("gait.step_height={:.17g}", draw(kStepHeightRange)),
        fmt::format("filter.alpha1={:.17g}", draw(kAlphaRange)),
        fmt::format("filter.alpha2={:.17g}", draw(kAlphaRange)),
        fmt::format("obstacle.peak={:.17g}", draw(kPeakRange)),
        fmt::format("seed={}", 100 + k)};
    auto spec = app::load_scenario(config_path("clearance_demo.yaml"), overrides);
    spec.scenario.filter_enabled = true;
    const auto setup = app::make_setup(spec);
    filter::FilterConfig fc = setup.filter;
    fc.cbf_enabled = true;
    fc.friction_enabled = false;
    const gait::TrotController controller(setup.model, setup.gait);
    const auto log = sim::run_scenario(setup.model, controller, fc, spec.terrain, spec.sim, spec.scenario);
    bool all_optimal = true;
    for (const auto& s : log.steps) {
      if (s.filter_active && s.status != qp::to_string(qp::QpStatus::kOptimal)) all_optimal = false;
    }
    if (!all_optimal) continue;
    ++optimal_runs;
    const double min_h = app::min_swing_h(log);
    worst = std::min(worst, min_h);
    if (!(min_h >= -1e-3)) ++violations;
  }
  const bool pass = optimal_runs == 20 && violations == 0;
  return {pass, fmt::format("{} of 20 runs all-optimal, {} below -1e-3 m, worst min h {:+.5f} m", optimal_runs,
                            violations, worst)};
}

Outcome qp_oracle() {
  std::mt19937_64 rng(5);
  double worst = 0.0;
  int mismatched = 0;
  for (int k = 0; k < 200; ++k) {
    const auto pb = testing::random_qp(rng, 6, 8);
    const auto ref = testing::enumerate_active_sets(pb);
    const auto sol = qp::solve(pb);
    if (!ref || sol.status != qp::QpStatus::kOptimal) {
      ++mismatched;
      continue;
    }
    const double err = (sol.x_star - *ref).cwiseAbs().maxCoeff();
    worst = std::max(worst, err);
    if (!(err <= 1e-5)) ++mismatched;
  }
  bool kkt_ok = false;
  std::string kkt = "friction run unavailable";
  if (g_friction) {
    const auto& r = *g_friction;
    kkt_ok = r.filter_steps > 0 && r.non_optimal_steps == 0 && r.max_kkt_primal <= 1e-6 &&
             r.max_kkt_dual <= 1e-6 && r.max_kkt_complementarity <= 1e-6;
    kkt = fmt::format("{} filter problems with max KKT primal {:.3g} dual {:.3g} complementarity {:.3g}",
                      r.filter_steps, r.max_kkt_primal, r.max_kkt_dual, r.max_kkt_complementarity);
  }
  return {mismatched == 0 && kkt_ok,
          fmt::format("200 random QPs, {} mismatched, max primal error {:.3g}; {}", mismatched, worst, kkt)};
}

Outcome dynamics_verification() {
  const auto chain =
      model::parse_model(testing::planar_chain_yaml(1.0, 0.5, 0.02, 1.0, 0.5, 0.02, false));
  model::RobotState s = model::neutral_state(chain);
  s.q << 1.0, 0.5;
  const Eigen::VectorXd none(0);
  const auto energy = [&](const model::RobotState& st) {
    return model::kinetic_energy(chain, st) + model::potential_energy(chain, st);
  };
  // Potential measured from the lowest configuration.
  const double e_min = -9.81 * (1.0 * 0.25 + 1.0 * 0.75);
  const double e0 = energy(s) - e_min;
  double drift = 0.0;
  for (int k = 0; k < 50000; ++k) {
    s = model::integrate(chain, s, model::forward_dynamics(chain, s, none), 1e-4);
    drift = std::max(drift, std::abs(energy(s) - e_min - e0) / e0);
  }

  const auto& m = testing::quadruped();
  std::mt19937_64 rng(17);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto st = testing::random_state(m, rng, 2.0);
    const Eigen::VectorXd u = testing::random_vector(m.nva(), rng, 20.0);
    const Eigen::VectorXd vdot = model::forward_dynamics(m, st, u);
    const Eigen::VectorXd tau = model::inverse_dynamics(m, st, vdot);
    worst = std::max(worst, (tau - m.selection_matrix() * u).norm());
  }
  return {chain.nva() == 0 && drift < 0.005 && worst <= 1e-8,
          fmt::format("energy drift {:.3g}% over 5 s, round-trip residual {:.3g} on 100 states", 100.0 * drift,
                      worst)};
}

Outcome gradient_check() {
  estimator::NetworkConfig c;
  c.d_in = 3;
  c.d_model = 8;
  c.heads = 2;
  c.layers = 2;
  c.k = 3;
  c.seq_len = 6;
  c.d_ff = 12;
  std::mt19937_64 rng(29);
  auto p = estimator::init_parameters(c, rng);
  std::normal_distribution<double> n(0.0, 1.0);
  auto randomize = [&](Eigen::MatrixXd& w, double scale) {
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] += scale * n(rng);
  };
  // Move the normalization and head parameters off their initial values.
  for (auto& l : p.layers) {
    randomize(l.ln1_g, 0.3);
    randomize(l.ln2_b, 0.2);
    randomize(l.c1, 0.2);
  }
  randomize(p.head_w, 1.0);
  std::vector<Eigen::MatrixXd> xs;
  for (int i = 0; i < 3; ++i) {
    Eigen::MatrixXd x(c.seq_len, c.d_in);
    for (Eigen::Index j = 0; j < x.size(); ++j) x.data()[j] = n(rng);
    xs.push_back(x);
  }
  std::vector<const Eigen::MatrixXd*> batch;
  for (const auto& x : xs) batch.push_back(&x);
  const std::vector<double> ys{0.3, 0.7, 0.9};

  const auto lg = estimator::loss_and_gradients(p, c, batch, ys);
  auto params = p.tensors();
  const auto grads = lg.grad.tensors();
  const double eps = 1e-5;
  double worst = 0.0;
  std::string worst_name;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Eigen::MatrixXd& w = *params[t].tensor;
    Eigen::MatrixXd fd(w.rows(), w.cols());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double keep = w.data()[i];
      w.data()[i] = keep + eps;
      const double up = estimator::loss_and_gradients(p, c, batch, ys).loss;
      w.data()[i] = keep - eps;
      const double down = estimator::loss_and_gradients(p, c, batch, ys).loss;
      w.data()[i] = keep;
      fd.data()[i] = (up - down) / (2 * eps);
    }
    const Eigen::MatrixXd& g = *grads[t].tensor;
    const double rel = (g - fd).norm() / std::max({g.norm(), fd.norm(), 1e-12});
    if (rel > worst) {
      worst = rel;
      worst_name = params[t].name;
    }
  }
  return {worst <= 1e-4, fmt::format("{} tensors, worst relative error {:.3g} ({})", params.size(), worst,
                                     worst_name)};
}

Outcome estimator_learning() {
  const auto spec = app::load_scenario(config_path("estimator.yaml"));
  const auto start = Clock::now();
  const auto data = app::generate_data(spec);
  const auto trained = app::train_estimator(spec, data);
  const auto eval = app::evaluate_estimator(trained.checkpoint, data, estimator::Split::kTest);
  const double runtime = seconds_since(start);
  const auto& d = spec.estimator.data;
  const double mae = eval.metrics.mae;
  const double improvement = 1.0 - mae / eval.baseline_mae;
  const bool pass = d.samples == 512 && data.windows.size() == 512 && d.mu_min == 0.2 && d.mu_max == 1.0 &&
                    mae <= 0.15 && improvement >= 0.25 && runtime <= 900.0;
  return {pass, fmt::format("{} samples, test MAE {:.4f}, baseline MAE {:.4f} ({:.1f}% better), runtime {:.0f} s",
                            data.windows.size(), mae, eval.baseline_mae, 100.0 * improvement, runtime)};
}

Outcome attention_scaling() {
  const auto spec = app::load_scenario(config_path("estimator.yaml"));
  const auto& net = spec.estimator.network;
  const double t480 = app::time_attention(net, 480, 9, spec.seed);
  const double t960 = app::time_attention(net, 960, 9, spec.seed);
  const double ratio = t960 / t480;
  return {ratio < 2.6, fmt::format("k = {}, L 480 {:.3g} s, L 960 {:.3g} s, ratio {:.3f}", net.k, t480, t960,
                                   ratio)};
}

Outcome determinism() {
  if (!g_friction || !g_clearance) return {false, "earlier runs unavailable"};
  const auto friction = app::run_friction_demo(app::load_scenario(config_path("friction_demo.yaml")));
  const auto clearance = app::run_clearance_demo(app::load_scenario(config_path("clearance_demo.yaml")));
  const bool f_same = csv_of(friction.log) == csv_of(g_friction->log);
  const bool n_same = csv_of(clearance.nominal.log) == csv_of(g_clearance->nominal.log);
  const bool c_same = csv_of(clearance.filtered.log) == csv_of(g_clearance->filtered.log);
  return {f_same && n_same && c_same,
          fmt::format("friction log {}, clearance nominal log {}, clearance filtered log {}",
                      f_same ? "identical" : "differs", n_same ? "identical" : "differs",
                      c_same ? "identical" : "differs")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 friction certification", friction_certification},
      {"2 GRF prediction consistency", grf_consistency},
      {"3 ground clearance", ground_clearance},
      {"4 forward invariance", forward_invariance},
      {"5 QP oracle equivalence", qp_oracle},
      {"6 dynamics verification", dynamics_verification},
      {"7 estimator gradient check", gradient_check},
      {"8 estimator learning", estimator_learning},
      {"9 linear attention scaling", attention_scaling},
      {"10 determinism", determinism},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << ": " << o.detail << std::endl;
  }
  std::cout << fmt::format("{} of {} criteria passed", criteria.size() - failures, criteria.size()) << std::endl;
  return failures == 0 ? 0 : 1;
}

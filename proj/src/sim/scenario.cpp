#include "legsafe/sim/scenario.hpp"

#include <fmt/format.h>

#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace legsafe::sim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::VectorXd joint_positions(const model::RobotModel& m, const Eigen::VectorXd& q) {
  Eigen::VectorXd out(m.nva());
  for (std::size_t b = 0; b < m.num_bodies(); ++b) {
    const int a = m.actuator_index(b);
    if (a >= 0) out[a] = q[m.q_index(b)];
  }
  return out;
}

Eigen::VectorXd joint_velocities(const model::RobotModel& m, const Eigen::VectorXd& v) {
  Eigen::VectorXd out(m.nva());
  const auto& idx = m.actuated_v_indices();
  for (int a = 0; a < m.nva(); ++a) out[a] = v[idx[static_cast<std::size_t>(a)]];
  return out;
}

/// Scatter a contact-ordered force vector into one slot per model foot.
Eigen::VectorXd per_foot(const Eigen::VectorXd& lambda, const model::ContactSet& contacts, int nf) {
  Eigen::VectorXd out = Eigen::VectorXd::Constant(3 * nf, kNaN);
  for (int i = 0; i < contacts.size(); ++i) {
    out.segment<3>(3 * contacts.feet()[static_cast<std::size_t>(i)]) = lambda.segment<3>(3 * i);
  }
  return out;
}

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  return fmt::format("{:.12g}", x);
}

double parse_num(const std::string& s) {
  if (s == "nan") return kNaN;
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::runtime_error("malformed number '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void ScenarioSettings::validate(const SimConfig& sim) const {
  if (!(duration >= 0.0)) throw std::invalid_argument("duration must be >= 0");
  if (!(control_dt > 0.0)) throw std::invalid_argument("control dt must be positive");
  if (sim.dt > control_dt * (1.0 + 1e-12)) throw std::invalid_argument("sim dt must not exceed the control dt");
  const double ratio = control_dt / sim.dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) {
    throw std::invalid_argument("control dt must be an integer multiple of the sim dt");
  }
  if (!(failure_height_fraction >= 0.0 && failure_height_fraction < 1.0)) {
    throw std::invalid_argument("failure height fraction must lie in [0, 1)");
  }
  if (!(initial_joint_noise >= 0.0)) throw std::invalid_argument("initial joint noise must be >= 0");
}

TrajectoryLog run_scenario(const model::RobotModel& model, const gait::TrotController& controller,
                           const filter::FilterConfig& filter_config, const Terrain& terrain,
                           const SimConfig& sim_config, const ScenarioSettings& settings) {
  terrain.validate();
  sim_config.validate();
  settings.validate(sim_config);
  filter_config.validate();
  if (std::abs(filter_config.gait_period - controller.config().schedule.gait_period) > 1e-12) {
    throw std::invalid_argument("filter and gait schedule disagree on the gait period");
  }
  const int nf = model.num_feet();
  const int nj = model.nva();
  const int substeps = static_cast<int>(std::lround(settings.control_dt / sim_config.dt));
  const long steps = std::lround(settings.duration / settings.control_dt);

  TrajectoryLog log;
  log.num_feet = nf;
  log.num_joints = nj;
  log.steps.reserve(static_cast<std::size_t>(steps));

  const double ground = terrain.height(0.0, 0.0);
  model::RobotState state = controller.standing_state(ground);
  if (settings.initial_joint_noise > 0.0) {
    std::mt19937_64 rng(settings.seed);
    std::normal_distribution<double> noise(0.0, settings.initial_joint_noise);
    for (std::size_t b = 0; b < model.num_bodies(); ++b) {
      if (model.actuator_index(b) >= 0) state.q[model.q_index(b)] += noise(rng);
    }
  }
  const double min_height = ground + settings.failure_height_fraction * controller.standing_height();

  std::optional<filter::SafetyFilter> sf;
  if (settings.filter_enabled) sf.emplace(model, filter_config);

  std::vector<Eigen::Vector3d> applied;
  for (long k = 0; k < steps; ++k) {
    state.t = static_cast<double>(k) * settings.control_dt;
    const gait::NominalCommand cmd = controller.command(state);

    StepRecord rec;
    rec.t = state.t;
    rec.phi = filter::phase(state.t, filter_config.gait_period).phi;
    rec.base_position = state.q.head<3>();
    rec.stance.assign(static_cast<std::size_t>(nf), 0);
    for (int f : cmd.contacts.feet()) rec.stance[static_cast<std::size_t>(f)] = 1;
    rec.q = joint_positions(model, state.q);
    rec.qd = joint_velocities(model, state.v);
    rec.u_nominal = cmd.u;
    rec.h = Eigen::VectorXd::Constant(nf, kNaN);
    for (int f = 0; f < nf; ++f) {
      if (cmd.contacts.contains(f)) continue;
      rec.h[f] = filter_config.obstacle_profile.empty()
                     ? model::foot_position(model, state, f).z() - ground
                     : filter::barrier_value(model, state, f, filter_config, rec.phi);
    }
    rec.ecbf_slack = Eigen::VectorXd::Constant(nf, kNaN);
    rec.ecbf_rhs = Eigen::VectorXd::Constant(nf, kNaN);

    Eigen::VectorXd u = cmd.u;
    if (sf && state.t >= settings.filter_start - 1e-12) {
      const filter::FilterDecision d = sf->step(state, cmd.contacts, cmd.u);
      u = d.u_filtered;
      rec.filter_active = true;
      rec.status = std::string(qp::to_string(d.status));
      rec.iterations = d.iterations;
      rec.fallback = d.fallback;
      rec.interference = d.interference;
      rec.kkt_primal = d.kkt.primal;
      rec.kkt_dual = d.kkt.dual;
      rec.kkt_complementarity = d.kkt.complementarity;
      rec.ecbf_slack = d.ecbf_slack;
      rec.ecbf_rhs = d.ecbf_rhs;
      rec.lambda_pred = per_foot(d.lambda, cmd.contacts, nf);
    } else {
      const auto pred = filter::predict_contact_forces(model, state, cmd.contacts, cmd.u);
      rec.lambda_pred = per_foot(pred.lambda, cmd.contacts, nf);
    }
    rec.u_applied = u;

    Eigen::VectorXd true_sum = Eigen::VectorXd::Zero(3 * nf);
    for (int s = 0; s < substeps; ++s) {
      state = step(model, state, u, terrain, sim_config, &applied);
      for (int f = 0; f < nf; ++f) true_sum.segment<3>(3 * f) += applied[static_cast<std::size_t>(f)];
    }
    rec.lambda_true = true_sum / substeps;
    log.steps.push_back(std::move(rec));

    if (!state.q.allFinite() || !state.v.allFinite()) {
      log.failed = true;
      log.failure_reason = fmt::format("state diverged at t = {:.3f} s", state.t);
      break;
    }
    if (state.q[2] < min_height) {
      log.failed = true;
      log.failure_reason =
          fmt::format("base height {:.4f} m below threshold {:.4f} m at t = {:.3f} s", state.q[2], min_height, state.t);
      break;
    }
  }
  return log;
}

std::vector<std::string> trajectory_columns(int nf, int nj) {
  std::vector<std::string> c{"t", "phi", "base_x", "base_y", "base_z", "filter_active", "status",
                             "iterations", "fallback", "interference", "kkt_primal", "kkt_dual",
                             "kkt_complementarity"};
  for (int f = 0; f < nf; ++f) {
    for (const char* n : {"stance", "h", "ecbf_slack", "ecbf_rhs", "lpred_x", "lpred_y", "lpred_z",
                          "ltrue_x", "ltrue_y", "ltrue_z"}) {
      c.push_back(fmt::format("{}_{}", n, f));
    }
  }
  for (int j = 0; j < nj; ++j) {
    for (const char* n : {"q", "qd", "u_nominal", "u"}) c.push_back(fmt::format("{}_{}", n, j));
  }
  return c;
}

void write_trajectory_csv(std::ostream& out, const TrajectoryLog& log) {
  out << "# " << kTrajectorySchema << " v" << kTrajectorySchemaVersion << " feet=" << log.num_feet
      << " joints=" << log.num_joints << "\n";
  const auto cols = trajectory_columns(log.num_feet, log.num_joints);
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << "\n";
  std::string line;
  for (const auto& r : log.steps) {
    line.clear();
    auto add = [&](const std::string& s) {
      if (!line.empty()) line += ',';
      line += s;
    };
    add(num(r.t));
    add(num(r.phi));
    for (int i = 0; i < 3; ++i) add(num(r.base_position[i]));
    add(r.filter_active ? "1" : "0");
    add(r.status);
    add(std::to_string(r.iterations));
    add(r.fallback ? "1" : "0");
    add(num(r.interference));
    add(num(r.kkt_primal));
    add(num(r.kkt_dual));
    add(num(r.kkt_complementarity));
    for (int f = 0; f < log.num_feet; ++f) {
      add(std::to_string(r.stance[static_cast<std::size_t>(f)]));
      add(num(r.h[f]));
      add(num(r.ecbf_slack[f]));
      add(num(r.ecbf_rhs[f]));
      for (int i = 0; i < 3; ++i) add(num(r.lambda_pred[3 * f + i]));
      for (int i = 0; i < 3; ++i) add(num(r.lambda_true[3 * f + i]));
    }
    for (int j = 0; j < log.num_joints; ++j) {
      add(num(r.q[j]));
      add(num(r.qd[j]));
      add(num(r.u_nominal[j]));
      add(num(r.u_applied[j]));
    }
    out << line << "\n";
  }
}

TrajectoryLog read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty trajectory file");
  TrajectoryLog log;
  int version = 0;
  char schema[64] = {0};
  if (std::sscanf(line.c_str(), "# %63s v%d feet=%d joints=%d", schema, &version, &log.num_feet,
                  &log.num_joints) != 4 ||
      std::string(schema) != kTrajectorySchema) {
    throw std::runtime_error("missing trajectory schema header");
  }
  if (version != kTrajectorySchemaVersion) {
    throw std::runtime_error(fmt::format("unsupported trajectory schema version {}", version));
  }
  if (!std::getline(in, line)) throw std::runtime_error("missing column header");
  const auto expected = trajectory_columns(log.num_feet, log.num_joints);
  const auto header = split(line);
  if (header != expected) throw std::runtime_error("column header does not match the schema");
  int row = 2;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != expected.size()) {
      throw std::runtime_error(fmt::format("line {}: expected {} columns, found {}", row, expected.size(), cells.size()));
    }
    StepRecord r;
    std::size_t i = 0;
    try {
      r.t = parse_num(cells[i++]);
      r.phi = parse_num(cells[i++]);
      for (int k = 0; k < 3; ++k) r.base_position[k] = parse_num(cells[i++]);
      r.filter_active = cells[i++] == "1";
      r.status = cells[i++];
      r.iterations = std::stoi(cells[i++]);
      r.fallback = cells[i++] == "1";
      r.interference = parse_num(cells[i++]);
      r.kkt_primal = parse_num(cells[i++]);
      r.kkt_dual = parse_num(cells[i++]);
      r.kkt_complementarity = parse_num(cells[i++]);
      const int nf = log.num_feet;
      const int nj = log.num_joints;
      r.stance.resize(static_cast<std::size_t>(nf));
      r.h.resize(nf);
      r.ecbf_slack.resize(nf);
      r.ecbf_rhs.resize(nf);
      r.lambda_pred.resize(3 * nf);
      r.lambda_true.resize(3 * nf);
      for (int f = 0; f < nf; ++f) {
        r.stance[static_cast<std::size_t>(f)] = std::stoi(cells[i++]);
        r.h[f] = parse_num(cells[i++]);
        r.ecbf_slack[f] = parse_num(cells[i++]);
        r.ecbf_rhs[f] = parse_num(cells[i++]);
        for (int k = 0; k < 3; ++k) r.lambda_pred[3 * f + k] = parse_num(cells[i++]);
        for (int k = 0; k < 3; ++k) r.lambda_true[3 * f + k] = parse_num(cells[i++]);
      }
      r.q.resize(nj);
      r.qd.resize(nj);
      r.u_nominal.resize(nj);
      r.u_applied.resize(nj);
      for (int j = 0; j < nj; ++j) {
        r.q[j] = parse_num(cells[i++]);
        r.qd[j] = parse_num(cells[i++]);
        r.u_nominal[j] = parse_num(cells[i++]);
        r.u_applied[j] = parse_num(cells[i++]);
      }
    } catch (const std::logic_error&) {
      throw std::runtime_error(fmt::format("line {}: malformed value in column '{}'", row, expected[i - 1]));
    }
    log.steps.push_back(std::move(r));
  }
  return log;
}

std::vector<std::vector<double>> stance_age(const TrajectoryLog& log) {
  const auto nf = static_cast<std::size_t>(log.num_feet);
  std::vector<std::vector<double>> out(log.steps.size(), std::vector<double>(nf, -1.0));
  std::vector<double> start(nf, 0.0);
  for (std::size_t k = 0; k < log.steps.size(); ++k) {
    const auto& r = log.steps[k];
    for (std::size_t f = 0; f < nf; ++f) {
      if (!r.stance[f]) continue;
      if (k == 0 || !log.steps[k - 1].stance[f]) start[f] = r.t;
      out[k][f] = r.t - start[f];
    }
  }
  return out;
}

GrfError measure_grf_error(const TrajectoryLog& log, double blanking, double t_from, double t_to) {
  const auto age = stance_age(log);
  GrfError e;
  double sv = 0.0;
  double sl = 0.0;
  for (std::size_t k = 0; k < log.steps.size(); ++k) {
    const auto& r = log.steps[k];
    if (r.t < t_from || r.t >= t_to) continue;
    for (int f = 0; f < log.num_feet; ++f) {
      if (age[k][static_cast<std::size_t>(f)] < blanking - 1e-12) continue;
      const Eigen::Vector3d p = r.lambda_pred.segment<3>(3 * f);
      if (!p.allFinite()) continue;
      const Eigen::Vector3d d = p - r.lambda_true.segment<3>(3 * f);
      sv += std::abs(d.z());
      sl += std::abs(d.x()) + std::abs(d.y());
      ++e.samples;
    }
  }
  if (e.samples > 0) {
    e.mae_vertical = sv / e.samples;
    e.mae_lateral = sl / (2.0 * e.samples);
  }
  return e;
}

FrictionStats friction_statistics(const TrajectoryLog& log, double mu, double blanking, double t_from,
                                  double t_to) {
  const double mt = filter::effective_friction(mu);
  const auto age = stance_age(log);
  FrictionStats s;
  double lat_true = 0.0;
  double lat_pred = 0.0;
  for (std::size_t k = 0; k < log.steps.size(); ++k) {
    const auto& r = log.steps[k];
    if (r.t < t_from || r.t >= t_to) continue;
    for (int f = 0; f < log.num_feet; ++f) {
      if (age[k][static_cast<std::size_t>(f)] < blanking - 1e-12) continue;
      const Eigen::Vector3d p = r.lambda_pred.segment<3>(3 * f);
      if (!p.allFinite()) continue;
      const double lat = std::max(std::abs(p.x()), std::abs(p.y()));
      s.max_violation = std::max(s.max_violation, lat - mt * p.z());
      if (p.z() > 0.0) s.max_ratio = std::max(s.max_ratio, lat / (mt * p.z()));
      else s.max_ratio = std::numeric_limits<double>::infinity();
      lat_pred += std::hypot(p.x(), p.y());
      lat_true += std::hypot(r.lambda_true[3 * f], r.lambda_true[3 * f + 1]);
      ++s.samples;
    }
  }
  if (s.samples > 0) {
    s.mean_abs_lateral_true = lat_true / s.samples;
    s.mean_abs_lateral_pred = lat_pred / s.samples;
  }
  return s;
}

}  // namespace legsafe::sim

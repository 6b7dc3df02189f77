#include "legsafe/app/config.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <sstream>

namespace legsafe::app {

namespace {

std::string where(const YAML::Node& node, const std::string& path) {
  const auto mark = node.Mark();
  if (mark.line < 0) return path;
  return fmt::format("line {}: {}", mark.line + 1, path);
}

/// One mapping in the config tree. Keys are consumed through the typed
/// getters; finish() rejects whatever was not consumed.
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_.IsDefined() && !node_.IsNull() && !node_.IsMap()) throw ConfigError(where(node_, path_) + " must be a mapping");
  }

  double number(const std::string& key, double fallback) {
    const auto found = take(key);
    if (!found) return fallback;
    const YAML::Node& v = *found;
    try {
      return v.as<double>();
    } catch (const YAML::Exception&) {
      throw ConfigError(where(v, full(key)) + " must be a number");
    }
  }
  int integer(const std::string& key, int fallback) {
    const auto found = take(key);
    if (!found) return fallback;
    const YAML::Node& v = *found;
    try {
      return v.as<int>();
    } catch (const YAML::Exception&) {
      throw ConfigError(where(v, full(key)) + " must be an integer");
    }
  }
  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    const auto found = take(key);
    if (!found) return fallback;
    const YAML::Node& v = *found;
    try {
      return v.as<std::uint64_t>();
    } catch (const YAML::Exception&) {
      throw ConfigError(where(v, full(key)) + " must be a non-negative integer");
    }
  }
  bool flag(const std::string& key, bool fallback) {
    const auto found = take(key);
    if (!found) return fallback;
    const YAML::Node& v = *found;
    try {
      return v.as<bool>();
    } catch (const YAML::Exception&) {
      throw ConfigError(where(v, full(key)) + " must be true or false");
    }
  }
  std::string text(const std::string& key, const std::string& fallback) {
    const auto found = take(key);
    if (!found) return fallback;
    const YAML::Node& v = *found;
    if (!v.IsScalar()) throw ConfigError(where(v, full(key)) + " must be a string");
    return v.as<std::string>();
  }
  template <typename T>
  std::vector<T> list(const std::string& key, const std::vector<T>& fallback) {
    const auto found = take(key);
    if (!found) return fallback;
    const YAML::Node& v = *found;
    try {
      return v.as<std::vector<T>>();
    } catch (const YAML::Exception&) {
      throw ConfigError(where(v, full(key)) + " must be a list of numbers");
    }
  }
  Section child(const std::string& key) {
    const auto found = take(key);
    return Section(found ? *found : YAML::Node(), full(key));
  }

  void finish() const {
    if (!node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!used_.count(key)) throw ConfigError(where(kv.first, full(key)) + ": unknown key");
    }
  }

 private:
  std::optional<YAML::Node> take(const std::string& key) {
    used_.insert(key);
    if (!node_.IsMap()) return std::nullopt;
    const YAML::Node& self = node_;
    const YAML::Node v = self[key];
    if (!v.IsDefined() || v.IsNull()) return std::nullopt;
    return v;
  }
  std::string full(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> used_;
};

void apply_override(YAML::Node& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  std::vector<std::string> parts;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    parts.push_back(part);
  }
  YAML::Node parsed;
  try {
    parsed = YAML::Load(value);
  } catch (const YAML::Exception&) {
    throw ConfigError("override value for '" + key + "' does not parse");
  }
  // yaml-cpp nodes are handles: copy construction aliases, assignment writes
  // through, so the walk only ever copy-constructs.
  std::vector<YAML::Node> chain{root};
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    YAML::Node& cur = chain.back();
    const YAML::Node existing = static_cast<const YAML::Node&>(cur)[parts[i]];
    if (existing.IsDefined() && !existing.IsNull()) {
      if (!existing.IsMap()) throw ConfigError("override key '" + key + "' crosses a non-mapping");
    } else {
      cur[parts[i]] = YAML::Node(YAML::NodeType::Map);
    }
    chain.push_back(YAML::Node(cur[parts[i]]));
  }
  chain.back()[parts.back()] = parsed;
}

ObstacleKind parse_obstacle_kind(const std::string& s) {
  if (s == "none") return ObstacleKind::kNone;
  if (s == "bump") return ObstacleKind::kBump;
  if (s == "polynomial") return ObstacleKind::kPolynomial;
  throw ConfigError("obstacle.type must be none, bump or polynomial");
}

sim::TerrainType parse_terrain_type(const std::string& s) {
  if (s == "flat") return sim::TerrainType::kFlat;
  if (s == "waves") return sim::TerrainType::kWaves;
  throw ConfigError("terrain.type must be flat or waves");
}

ScenarioSpec parse_root(const YAML::Node& root, const std::string& base_dir) {
  ScenarioSpec spec;
  Section top(root, "");
  spec.preset = top.text("preset", spec.preset);
  if (spec.preset != "simulate" && spec.preset != "friction" && spec.preset != "clearance" &&
      spec.preset != "estimator") {
    throw ConfigError("preset must be simulate, friction, clearance or estimator");
  }
  const std::string model = top.text("model", "");
  if (model.empty()) throw ConfigError("model: a robot model path is required");
  std::filesystem::path mp(model);
  if (mp.is_relative()) mp = std::filesystem::path(base_dir) / mp;
  spec.model_path = mp.lexically_normal().string();
  if (!std::filesystem::exists(spec.model_path)) throw ConfigError("model file not found: " + spec.model_path);
  spec.seed = top.unsigned_integer("seed", spec.seed);

  {
    Section s = top.child("terrain");
    auto& t = spec.terrain;
    t.mu_true = s.number("mu", t.mu_true);
    t.type = parse_terrain_type(s.text("type", "flat"));
    t.offset = s.number("offset", t.offset);
    t.amplitude = s.number("amplitude", t.amplitude);
    t.wavelength = s.number("wavelength", t.wavelength);
    s.finish();
  }
  {
    Section s = top.child("sim");
    auto& c = spec.sim;
    c.dt = s.number("dt", c.dt);
    c.stiffness = s.number("stiffness", c.stiffness);
    c.damping = s.number("damping", c.damping);
    c.damping_depth = s.number("damping_depth", c.damping_depth);
    c.v_eps = s.number("v_eps", c.v_eps);
    s.finish();
  }
  {
    Section s = top.child("scenario");
    auto& c = spec.scenario;
    c.duration = s.number("duration", c.duration);
    c.control_dt = s.number("control_dt", c.control_dt);
    c.filter_enabled = s.flag("filter_enabled", c.filter_enabled);
    c.filter_start = s.number("filter_start", c.filter_start);
    c.failure_height_fraction = s.number("failure_height_fraction", c.failure_height_fraction);
    c.initial_joint_noise = s.number("initial_joint_noise", c.initial_joint_noise);
    s.finish();
  }
  {
    Section s = top.child("gait");
    auto& g = spec.gait;
    g.schedule.gait_period = s.number("period", g.schedule.gait_period);
    g.schedule.duty = s.number("duty", g.schedule.duty);
    g.schedule.step_length = s.number("step_length", g.schedule.step_length);
    g.schedule.step_height = s.number("step_height", g.schedule.step_height);
    g.schedule.body_velocity_target = s.number("velocity", g.schedule.body_velocity_target);
    g.gains.kp = s.number("kp", g.gains.kp);
    g.gains.kd = s.number("kd", g.gains.kd);
    g.stand_thigh = s.number("stand_thigh", g.stand_thigh);
    g.stand_calf = s.number("stand_calf", g.stand_calf);
    g.stance_splay = s.number("stance_splay", g.stance_splay);
    s.finish();
  }
  {
    Section s = top.child("filter");
    auto& f = spec.filter;
    f.mu = s.number("mu", f.mu);
    f.alpha1 = s.number("alpha1", f.alpha1);
    f.alpha2 = s.number("alpha2", f.alpha2);
    f.cbf_enabled = s.flag("cbf_enabled", f.cbf_enabled);
    f.friction_enabled = s.flag("friction_enabled", f.friction_enabled);
    f.torque_limits_enabled = s.flag("torque_limits_enabled", f.torque_limits_enabled);
    f.min_normal_force = s.number("min_normal_force", f.min_normal_force);
    Section q = s.child("qp");
    f.qp.tol_feas = q.number("tol_feas", f.qp.tol_feas);
    f.qp.tol_opt = q.number("tol_opt", f.qp.tol_opt);
    f.qp.max_iter = q.integer("max_iter", f.qp.max_iter);
    f.qp.rho = q.number("rho", f.qp.rho);
    f.qp.alpha = q.number("alpha", f.qp.alpha);
    f.qp.polish = q.flag("polish", f.qp.polish);
    q.finish();
    s.finish();
  }
  {
    Section s = top.child("obstacle");
    auto& o = spec.obstacle;
    o.kind = parse_obstacle_kind(s.text("type", "none"));
    o.peak = s.number("peak", o.peak);
    o.base = s.number("base", o.base);
    o.coefficients = s.list<double>("coefficients", o.coefficients);
    o.feet = s.list<int>("feet", o.feet);
    s.finish();
  }
  {
    Section s = top.child("friction_demo");
    auto& d = spec.friction_demo;
    d.mu = s.number("mu", d.mu);
    d.activate_at = s.number("activate_at", d.activate_at);
    d.blanking = s.number("blanking", d.blanking);
    s.finish();
  }
  {
    Section s = top.child("clearance_demo");
    auto& d = spec.clearance_demo;
    d.friction_rows = s.flag("friction_rows", d.friction_rows);
    d.slack_fraction = s.number("slack_fraction", d.slack_fraction);
    s.finish();
  }
  {
    Section e = top.child("estimator");
    auto& est = spec.estimator;
    Section d = e.child("data");
    est.data.samples = d.integer("samples", est.data.samples);
    est.data.mu_min = d.number("mu_min", est.data.mu_min);
    est.data.mu_max = d.number("mu_max", est.data.mu_max);
    est.data.windows_per_run = d.integer("windows_per_run", est.data.windows_per_run);
    est.data.warmup = d.number("warmup", est.data.warmup);
    est.data.val_fraction = d.number("val_fraction", est.data.val_fraction);
    est.data.test_fraction = d.number("test_fraction", est.data.test_fraction);
    est.data.velocity_min = d.number("velocity_min", est.data.velocity_min);
    est.data.velocity_max = d.number("velocity_max", est.data.velocity_max);
    est.data.stance_splay = d.number("stance_splay", est.data.stance_splay);
    est.data.joint_noise = d.number("joint_noise", est.data.joint_noise);
    d.finish();
    Section w = e.child("window");
    est.window.timesteps = w.integer("timesteps", est.window.timesteps);
    est.window.dt = w.number("dt", est.window.dt);
    w.finish();
    Section n = e.child("network");
    est.network.d_model = n.integer("d_model", est.network.d_model);
    est.network.heads = n.integer("heads", est.network.heads);
    est.network.layers = n.integer("layers", est.network.layers);
    est.network.k = n.integer("k", est.network.k);
    est.network.d_ff = n.integer("d_ff", est.network.d_ff);
    n.finish();
    Section t = e.child("training");
    est.training.epochs = t.integer("epochs", est.training.epochs);
    est.training.batch_size = t.integer("batch_size", est.training.batch_size);
    est.training.max_steps = t.integer("max_steps", static_cast<int>(est.training.max_steps));
    est.training.learning_rate = t.number("learning_rate", est.training.learning_rate);
    est.training.final_lr_fraction = t.number("final_lr_fraction", est.training.final_lr_fraction);
    est.training.clip_norm = t.number("clip_norm", est.training.clip_norm);
    t.finish();
    e.finish();
  }
  top.finish();
  spec.finalize();
  return spec;
}

}  // namespace

void ScenarioSpec::finalize() {
  // One root generator hands out every component seed in a fixed order.
  std::mt19937_64 root(seed);
  scenario.seed = root();
  sim.seed = root();
  estimator.data.seed = root();
  estimator.training.seed = root();
  estimator.init_seed = root();
  sim.duration = scenario.duration;

  filter.gait_period = gait.schedule.gait_period;
  estimator.window.num_joints = 12;
  estimator.network.seq_len = estimator.window.seq_len();
  try {
    terrain.validate();
    sim.validate();
    scenario.validate(sim);
    gait.schedule.validate();
    if (!(gait.gains.kp >= 0.0 && gait.gains.kd >= 0.0)) throw std::invalid_argument("PD gains must be >= 0");
    filter.validate();
    if (!(friction_demo.mu > 0.0)) throw std::invalid_argument("friction_demo.mu must be positive");
    if (!(friction_demo.activate_at >= 0.0 && friction_demo.activate_at <= scenario.duration)) {
      throw std::invalid_argument("friction_demo.activate_at must lie within the run");
    }
    if (!(friction_demo.blanking >= 0.0)) throw std::invalid_argument("friction_demo.blanking must be >= 0");
    if (!(clearance_demo.slack_fraction >= 0.0)) throw std::invalid_argument("clearance_demo.slack_fraction must be >= 0");
    for (int f : obstacle.feet) {
      if (f < 0 || f > 3) throw std::invalid_argument("obstacle.feet entries must lie in 0..3");
    }
    if (obstacle.kind == ObstacleKind::kPolynomial && obstacle.coefficients.empty()) {
      throw std::invalid_argument("obstacle.coefficients are required for a polynomial obstacle");
    }
    estimator.data.validate();
    estimator.window.validate();
    estimator.network.validate();
    estimator.training.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

ScenarioSpec parse_scenario(const std::string& yaml_text, const std::string& base_dir,
                            const std::vector<std::string>& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(fmt::format("line {}: {}", e.mark.line + 1, e.msg));
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) throw ConfigError("scenario file must be a mapping");
  for (const auto& o : overrides) apply_override(root, o);
  return parse_root(root, base_dir);
}

ScenarioSpec load_scenario(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_scenario(ss.str(), std::filesystem::path(path).parent_path().string(), overrides);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::vector<filter::FootClearance> build_obstacle(const ObstacleSpec& spec, const gait::GaitSchedule& schedule,
                                                  double terrain_height) {
  std::vector<filter::FootClearance> out;
  if (spec.kind == ObstacleKind::kNone) return out;
  const filter::PolynomialProfile profile =
      spec.kind == ObstacleKind::kBump ? filter::PolynomialProfile::bump(spec.peak, terrain_height + spec.base)
                                       : filter::PolynomialProfile(spec.coefficients);
  for (int f = 0; f < 4; ++f) {
    filter::FootClearance fc;
    fc.terrain_height = terrain_height;
    // Swing occupies the part of the period outside the foot's stance.
    fc.window_start = std::fmod(schedule.stance_start(f) + schedule.duty, 1.0);
    fc.window_length = 1.0 - schedule.duty;
    const bool listed = std::find(spec.feet.begin(), spec.feet.end(), f) != spec.feet.end();
    fc.profile = listed ? profile : filter::PolynomialProfile({terrain_height - 1.0});
    out.push_back(fc);
  }
  return out;
}

}  // namespace legsafe::app

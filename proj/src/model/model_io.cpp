#include "legsafe/model/model_io.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace legsafe::model {

ModelParseError::ModelParseError(const std::string& message, int line)
    : ModelError(line > 0 ? "line " + std::to_string(line) + ": " + message : message),
      line_(line) {}

namespace {

int line_of(const YAML::Node& node) { return node.Mark().line + 1; }

[[noreturn]] void fail(const YAML::Node& node, const std::string& message) {
  throw ModelParseError(message, line_of(node));
}

void reject_unknown_keys(const YAML::Node& node, const std::set<std::string>& allowed) {
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.contains(key)) fail(kv.first, "unknown key '" + key + "'");
  }
}

YAML::Node require(const YAML::Node& node, const std::string& key) {
  const YAML::Node child = node[key];
  if (!child) fail(node, "missing required key '" + key + "'");
  return child;
}

double as_double(const YAML::Node& node) {
  try {
    return node.as<double>();
  } catch (const YAML::Exception&) {
    fail(node, "expected a number");
  }
}

std::string as_string(const YAML::Node& node) {
  if (!node.IsScalar()) fail(node, "expected a string");
  return node.as<std::string>();
}

Eigen::Vector3d as_vec3(const YAML::Node& node) {
  if (!node.IsSequence() || node.size() != 3) fail(node, "expected a 3-element list");
  return {as_double(node[0]), as_double(node[1]), as_double(node[2])};
}

Eigen::Isometry3d parse_origin(const YAML::Node& node) {
  reject_unknown_keys(node, {"xyz", "rpy"});
  Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
  if (node["xyz"]) T.translation() = as_vec3(node["xyz"]);
  if (node["rpy"]) {
    const Eigen::Vector3d rpy = as_vec3(node["rpy"]);
    T.linear() = (Eigen::AngleAxisd(rpy.z(), Eigen::Vector3d::UnitZ()) *
                  Eigen::AngleAxisd(rpy.y(), Eigen::Vector3d::UnitY()) *
                  Eigen::AngleAxisd(rpy.x(), Eigen::Vector3d::UnitX()))
                     .toRotationMatrix();
  }
  return T;
}

Link parse_link(const YAML::Node& node) {
  reject_unknown_keys(node, {"name", "mass", "com", "inertia"});
  Link link;
  link.name = as_string(require(node, "name"));
  link.mass = as_double(require(node, "mass"));
  if (node["com"]) link.com = as_vec3(node["com"]);
  const YAML::Node in = require(node, "inertia");
  if (!in.IsSequence() || in.size() != 6) {
    fail(in, "inertia must be [ixx, iyy, izz, ixy, ixz, iyz]");
  }
  const double ixx = as_double(in[0]), iyy = as_double(in[1]), izz = as_double(in[2]);
  const double ixy = as_double(in[3]), ixz = as_double(in[4]), iyz = as_double(in[5]);
  link.inertia << ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz;
  try {
    validate_link(link);
  } catch (const ModelError& e) {
    fail(node, e.what());
  }
  return link;
}

JointType parse_joint_type(const YAML::Node& node) {
  const std::string t = as_string(node);
  if (t == "revolute") return JointType::kRevolute;
  if (t == "prismatic") return JointType::kPrismatic;
  fail(node, "unsupported joint type '" + t + "' (expected revolute or prismatic)");
}

}  // namespace

RobotModel parse_model(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ModelParseError(e.msg, e.mark.line + 1);
  }
  if (!root.IsMap()) throw ModelParseError("model file must be a mapping", 1);
  reject_unknown_keys(root, {"name", "base", "links", "joints", "feet"});

  const std::string name = root["name"] ? as_string(root["name"]) : std::string("robot");
  JointType base_type = JointType::kFloatingBase;
  Eigen::Isometry3d base_origin = Eigen::Isometry3d::Identity();
  if (const YAML::Node base = root["base"]) {
    std::string type;
    if (base.IsScalar()) {
      type = as_string(base);
    } else {
      reject_unknown_keys(base, {"type", "origin"});
      type = as_string(require(base, "type"));
      if (base["origin"]) base_origin = parse_origin(base["origin"]);
    }
    if (type == "floating") {
      base_type = JointType::kFloatingBase;
    } else if (type == "fixed") {
      base_type = JointType::kFixedBase;
    } else {
      fail(base, "base must be 'floating' or 'fixed'");
    }
  }

  const YAML::Node links_node = require(root, "links");
  if (!links_node.IsSequence() || links_node.size() == 0) fail(links_node, "links must be a non-empty list");
  std::vector<Link> links;
  std::map<std::string, int> link_index;
  for (const auto& ln : links_node) {
    Link link = parse_link(ln);
    if (link_index.contains(link.name)) fail(ln, "duplicate link '" + link.name + "'");
    link_index[link.name] = static_cast<int>(links.size());
    links.push_back(std::move(link));
  }

  auto lookup = [&](const YAML::Node& node) {
    const std::string n = as_string(node);
    const auto it = link_index.find(n);
    if (it == link_index.end()) fail(node, "unknown link '" + n + "'");
    return it->second;
  };

  std::vector<Joint> joints;
  std::vector<int> parent_of(links.size(), -1);
  std::vector<int> joint_line(links.size(), 0);
  if (const YAML::Node joints_node = root["joints"]) {
    if (!joints_node.IsSequence()) fail(joints_node, "joints must be a list");
    for (const auto& jn : joints_node) {
      reject_unknown_keys(jn, {"name", "type", "parent", "child", "axis", "origin", "actuated",
                               "torque_limit"});
      Joint jt;
      jt.name = as_string(require(jn, "name"));
      jt.type = parse_joint_type(require(jn, "type"));
      jt.parent = lookup(require(jn, "parent"));
      jt.child = lookup(require(jn, "child"));
      if (jt.parent == jt.child) fail(jn, "joint '" + jt.name + "' connects a link to itself");
      if (parent_of[jt.child] != -1) {
        fail(jn, "link '" + links[jt.child].name + "' already has a parent (line " +
                     std::to_string(joint_line[jt.child]) + "); topology is not a tree");
      }
      parent_of[jt.child] = jt.parent;
      joint_line[jt.child] = line_of(jn);
      jt.axis = as_vec3(require(jn, "axis"));
      if (jt.axis.norm() < 1e-12) fail(jn, "joint axis must be non-zero");
      if (jn["origin"]) jt.placement = parse_origin(jn["origin"]);
      jt.actuated = jn["actuated"] ? jn["actuated"].as<bool>() : false;
      if (jn["torque_limit"]) jt.torque_limit = as_double(jn["torque_limit"]);
      if (jt.actuated && !(jt.torque_limit > 0.0)) {
        fail(jn, "actuated joint '" + jt.name + "' needs a positive torque_limit");
      }
      joints.push_back(std::move(jt));
    }
  }

  int root_link = -1;
  for (std::size_t l = 0; l < links.size(); ++l) {
    if (parent_of[l] != -1) continue;
    if (root_link != -1) {
      throw ModelParseError("links '" + links[root_link].name + "' and '" + links[l].name +
                                "' both lack a parent; the model must be a single tree",
                            line_of(links_node[l]));
    }
    root_link = static_cast<int>(l);
  }
  // Walking up from any link must reach the root; otherwise there is a cycle.
  for (std::size_t l = 0; l < links.size(); ++l) {
    int cur = static_cast<int>(l);
    std::size_t steps = 0;
    while (cur != -1 && steps <= links.size()) {
      cur = parent_of[cur];
      ++steps;
    }
    if (cur != -1) {
      throw ModelParseError("kinematic loop through link '" + links[l].name + "'",
                            joint_line[l]);
    }
  }
  if (root_link == -1) throw ModelParseError("model has no root link (every link has a parent)", 0);

  Joint base;
  base.name = "base";
  base.type = base_type;
  base.parent = -1;
  base.child = root_link;
  base.placement = base_origin;
  joints.insert(joints.begin(), base);

  std::vector<Foot> feet;
  if (const YAML::Node feet_node = root["feet"]) {
    if (!feet_node.IsSequence()) fail(feet_node, "feet must be a list");
    for (const auto& fn : feet_node) {
      reject_unknown_keys(fn, {"name", "link", "offset"});
      Foot f;
      f.name = as_string(require(fn, "name"));
      f.link = lookup(require(fn, "link"));
      if (fn["offset"]) f.offset = as_vec3(fn["offset"]);
      feet.push_back(std::move(f));
    }
  }

  return RobotModel(name, std::move(links), std::move(joints), std::move(feet));
}

RobotModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelParseError("cannot open model file '" + path.string() + "'", 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

}  // namespace legsafe::model

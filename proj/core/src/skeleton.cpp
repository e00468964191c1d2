#include "kinedeep/skeleton.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "kinedeep/error.h"

namespace kinedeep {

namespace detail {
extern const std::string_view kHand23Config;
}  // namespace detail

namespace {

using nlohmann::json;

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;
// Slack for bounds written as +-180 degrees.
constexpr double kAngleSlack = 1e-12;

std::string dofLabel(const JointSpec& joint, std::size_t slot) {
  return "joint '" + joint.name + "' dof " + std::to_string(slot);
}

// Reports whether following parent links from `start` returns to `joint`.
bool reachesSelf(const std::vector<JointSpec>& joints, int joint, int start) {
  std::set<int> visited;
  int current = start;
  while (current >= 0 && current < static_cast<int>(joints.size())) {
    if (current == joint) {
      return true;
    }
    if (!visited.insert(current).second) {
      return false;
    }
    current = joints[static_cast<std::size_t>(current)].parent;
  }
  return false;
}

void validateJoints(const std::vector<JointSpec>& joints) {
  if (joints.empty()) {
    throwValidation("skeleton has no joints");
  }
  std::set<std::string> names;
  int roots = 0;
  const int count = static_cast<int>(joints.size());
  for (int i = 0; i < count; ++i) {
    const JointSpec& joint = joints[static_cast<std::size_t>(i)];
    if (joint.name.empty()) {
      throwValidation("joint " + std::to_string(i) + " has an empty name");
    }
    if (!names.insert(joint.name).second) {
      throwValidation("duplicate joint name '" + joint.name + "'");
    }
    if (joint.parent < 0) {
      ++roots;
      if (i != 0) {
        throwValidation("root joint '" + joint.name + "' must be listed first");
      }
    } else if (joint.parent == i || reachesSelf(joints, i, joint.parent)) {
      throwValidation("cycle in parent links at joint '" + joint.name + "'");
    } else if (joint.parent >= count) {
      throwValidation("joint '" + joint.name + "' has unknown parent index " + std::to_string(joint.parent));
    } else if (joint.parent > i) {
      throwValidation(
          "joint '" + joint.name + "' is listed before its parent '" +
          joints[static_cast<std::size_t>(joint.parent)].name + "'");
    }
    if (!std::isfinite(joint.bone_length) || joint.bone_length < 0.0) {
      throwValidation("joint '" + joint.name + "' has invalid bone length");
    }
    if (joint.parent < 0 && joint.bone_length != 0.0) {
      throwValidation("root joint '" + joint.name + "' must have bone length 0");
    }
    if (!joint.rest_offset.allFinite()) {
      throwValidation("joint '" + joint.name + "' has a non-finite rest offset");
    }
    for (std::size_t slot = 0; slot < joint.dofs.size(); ++slot) {
      const DofSpec& dof = joint.dofs[slot];
      if (!std::isfinite(dof.lower) || !std::isfinite(dof.upper)) {
        throwValidation(dofLabel(joint, slot) + " has non-finite bounds");
      }
      if (dof.lower > dof.upper) {
        throwValidation(dofLabel(joint, slot) + " has lower bound above upper bound");
      }
      if (dof.kind == DofKind::Rotation &&
          (dof.lower < -std::numbers::pi - kAngleSlack || dof.upper > std::numbers::pi + kAngleSlack)) {
        throwValidation(dofLabel(joint, slot) + " has rotation bounds outside [-180, 180] degrees");
      }
      if (dof.kind == DofKind::Translation && joint.parent >= 0) {
        throwValidation(dofLabel(joint, slot) + " is a translation on a non-root joint");
      }
    }
  }
  if (roots != 1) {
    throwValidation("skeleton must have exactly one root joint, found " + std::to_string(roots));
  }
}

Axis parseAxis(const std::string& text, const std::string& where) {
  if (text == "X" || text == "x") {
    return Axis::X;
  }
  if (text == "Y" || text == "y") {
    return Axis::Y;
  }
  if (text == "Z" || text == "z") {
    return Axis::Z;
  }
  throwValidation(where + ": unknown axis '" + text + "'");
}

DofKind parseKind(const std::string& text, const std::string& where) {
  if (text == "rotation") {
    return DofKind::Rotation;
  }
  if (text == "translation") {
    return DofKind::Translation;
  }
  throwValidation(where + ": unknown dof kind '" + text + "'");
}

double requireNumber(const json& object, const char* key, const std::string& where) {
  const auto it = object.find(key);
  if (it == object.end() || !it->is_number()) {
    throwValidation(where + ": missing numeric field '" + key + "'");
  }
  return it->get<double>();
}

DofSpec parseDof(const json& node, const std::string& where) {
  if (!node.is_object()) {
    throwValidation(where + ": dof entry must be an object");
  }
  DofSpec dof;
  dof.kind = parseKind(node.value("kind", std::string{}), where);
  dof.axis = parseAxis(node.value("axis", std::string{}), where);
  if (dof.kind == DofKind::Rotation) {
    dof.lower = requireNumber(node, "lower_deg", where) * kDegToRad;
    dof.upper = requireNumber(node, "upper_deg", where) * kDegToRad;
  } else {
    dof.lower = requireNumber(node, "lower_mm", where);
    dof.upper = requireNumber(node, "upper_mm", where);
  }
  return dof;
}

}  // namespace

std::string_view toString(DofKind kind) {
  return kind == DofKind::Rotation ? "rotation" : "translation";
}

std::string_view toString(Axis axis) {
  switch (axis) {
    case Axis::X:
      return "X";
    case Axis::Y:
      return "Y";
    case Axis::Z:
      return "Z";
  }
  return "?";
}

Skeleton::Skeleton(std::string name, std::vector<JointSpec> joints, std::vector<int> eval_subset)
    : name_(std::move(name)), joints_(std::move(joints)), evalSubset_(std::move(eval_subset)) {
  validateJoints(joints_);

  const int count = jointCount();
  if (evalSubset_.empty()) {
    evalSubset_.resize(joints_.size());
    for (int i = 0; i < count; ++i) {
      evalSubset_[static_cast<std::size_t>(i)] = i;
    }
  }
  std::set<int> seen;
  for (int index : evalSubset_) {
    if (index < 0 || index >= count) {
      throwValidation("eval subset references unknown joint index " + std::to_string(index));
    }
    if (!seen.insert(index).second) {
      throwValidation("eval subset lists joint '" + joint(index).name + "' twice");
    }
  }

  firstDof_.resize(joints_.size());
  for (int i = 0; i < count; ++i) {
    firstDof_[static_cast<std::size_t>(i)] = static_cast<int>(dofIndex_.size());
    for (std::size_t slot = 0; slot < joint(i).dofs.size(); ++slot) {
      dofIndex_.push_back(DofRef{i, static_cast<int>(slot)});
    }
  }

  lower_.resize(dofCount());
  upper_.resize(dofCount());
  for (int d = 0; d < dofCount(); ++d) {
    lower_[d] = dof(d).lower;
    upper_[d] = dof(d).upper;
  }

  // Parents precede children, so a reverse sweep sees every child before its
  // parent; prepending keeps each subtree in topological order.
  subtree_.assign(joints_.size(), {});
  for (int i = count - 1; i >= 0; --i) {
    auto& own = subtree_[static_cast<std::size_t>(i)];
    own.insert(own.begin(), i);
    std::sort(own.begin() + 1, own.end());
    const int parent = joint(i).parent;
    if (parent >= 0) {
      auto& up = subtree_[static_cast<std::size_t>(parent)];
      up.insert(up.end(), own.begin(), own.end());
    }
  }
}

const DofSpec& Skeleton::dof(int d) const {
  const DofRef& ref = dofIndex_[static_cast<std::size_t>(d)];
  return joint(ref.joint).dofs[static_cast<std::size_t>(ref.slot)];
}

bool Skeleton::isAncestorOrSelf(int ancestor, int joint_index) const {
  for (int current = joint_index; current >= 0; current = joint(current).parent) {
    if (current == ancestor) {
      return true;
    }
  }
  return false;
}

std::optional<int> Skeleton::findJoint(std::string_view joint_name) const {
  for (int i = 0; i < jointCount(); ++i) {
    if (joint(i).name == joint_name) {
      return i;
    }
  }
  return std::nullopt;
}

Skeleton parseSkeleton(std::string_view json_text, std::string default_name) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throwValidation(std::string("skeleton config parse failure: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("joints") || !doc["joints"].is_array()) {
    throwValidation("skeleton config parse failure: expected an object with a 'joints' array");
  }

  const json& nodes = doc["joints"];
  std::unordered_map<std::string, int> byName;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const json& node = nodes[i];
    if (!node.is_object() || !node.contains("name") || !node["name"].is_string()) {
      throwValidation("skeleton config parse failure: joint " + std::to_string(i) + " needs a string 'name'");
    }
    const auto name = node["name"].get<std::string>();
    if (!byName.emplace(name, static_cast<int>(i)).second) {
      throwValidation("duplicate joint name '" + name + "'");
    }
  }

  std::vector<JointSpec> joints;
  joints.reserve(nodes.size());
  for (const json& node : nodes) {
    JointSpec joint;
    joint.name = node["name"].get<std::string>();
    const std::string where = "joint '" + joint.name + "'";
    const json parent = node.value("parent", json(nullptr));
    if (parent.is_string()) {
      const auto it = byName.find(parent.get<std::string>());
      if (it == byName.end()) {
        throwValidation(where + " has unknown parent '" + parent.get<std::string>() + "'");
      }
      joint.parent = it->second;
    } else if (parent.is_number_integer()) {
      joint.parent = parent.get<int>();
      if (joint.parent < 0) {
        throwValidation(where + " has negative parent index");
      }
    } else if (!parent.is_null()) {
      throwValidation(where + ": 'parent' must be a joint name, an index or null");
    }
    joint.bone_length = node.contains("bone_length_mm") ? requireNumber(node, "bone_length_mm", where) : 0.0;
    if (node.contains("rest_offset_deg")) {
      const json& offset = node["rest_offset_deg"];
      if (!offset.is_array() || offset.size() != 3) {
        throwValidation(where + ": 'rest_offset_deg' must hold 3 numbers");
      }
      for (int k = 0; k < 3; ++k) {
        if (!offset[static_cast<std::size_t>(k)].is_number()) {
          throwValidation(where + ": 'rest_offset_deg' must hold 3 numbers");
        }
        joint.rest_offset[k] = offset[static_cast<std::size_t>(k)].get<double>() * kDegToRad;
      }
    }
    if (node.contains("dofs")) {
      if (!node["dofs"].is_array()) {
        throwValidation(where + ": 'dofs' must be an array");
      }
      std::size_t slot = 0;
      for (const json& dofNode : node["dofs"]) {
        joint.dofs.push_back(parseDof(dofNode, dofLabel(joint, slot++)));
      }
    }
    joints.push_back(std::move(joint));
  }

  std::vector<int> evalSubset;
  if (doc.contains("eval_subset")) {
    if (!doc["eval_subset"].is_array()) {
      throwValidation("'eval_subset' must be an array of joint names");
    }
    for (const json& entry : doc["eval_subset"]) {
      if (!entry.is_string()) {
        throwValidation("'eval_subset' must be an array of joint names");
      }
      const auto it = byName.find(entry.get<std::string>());
      if (it == byName.end()) {
        throwValidation("eval subset references unknown joint '" + entry.get<std::string>() + "'");
      }
      evalSubset.push_back(it->second);
    }
  }

  std::string name = doc.value("name", std::move(default_name));
  return Skeleton(std::move(name), std::move(joints), std::move(evalSubset));
}

Skeleton loadSkeleton(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throwValidation("cannot read skeleton config '" + path.string() + "'");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parseSkeleton(buffer.str(), path.stem().string());
}

std::string skeletonToJson(const Skeleton& skeleton) {
  json joints = json::array();
  for (const JointSpec& joint : skeleton.joints()) {
    json node;
    node["name"] = joint.name;
    node["parent"] = joint.parent < 0 ? json(nullptr) : json(skeleton.joint(joint.parent).name);
    node["bone_length_mm"] = joint.bone_length;
    if (!joint.rest_offset.isZero(0.0)) {
      node["rest_offset_deg"] = {
          joint.rest_offset.x() * kRadToDeg, joint.rest_offset.y() * kRadToDeg, joint.rest_offset.z() * kRadToDeg};
    }
    json dofs = json::array();
    for (const DofSpec& dof : joint.dofs) {
      json d;
      d["kind"] = std::string(toString(dof.kind));
      d["axis"] = std::string(toString(dof.axis));
      if (dof.kind == DofKind::Rotation) {
        d["lower_deg"] = dof.lower * kRadToDeg;
        d["upper_deg"] = dof.upper * kRadToDeg;
      } else {
        d["lower_mm"] = dof.lower;
        d["upper_mm"] = dof.upper;
      }
      dofs.push_back(std::move(d));
    }
    node["dofs"] = std::move(dofs);
    joints.push_back(std::move(node));
  }
  json evalSubset = json::array();
  for (int index : skeleton.evalSubset()) {
    evalSubset.push_back(skeleton.joint(index).name);
  }
  json doc;
  doc["name"] = skeleton.name();
  doc["joints"] = std::move(joints);
  doc["eval_subset"] = std::move(evalSubset);
  return doc.dump(2) + "\n";
}

bool structurallyEqual(const Skeleton& a, const Skeleton& b, double tolerance) {
  const auto close = [tolerance](double x, double y) {
    return std::abs(x - y) <= tolerance * std::max(1.0, std::abs(x));
  };
  if (a.name() != b.name() || a.jointCount() != b.jointCount() || a.evalSubset() != b.evalSubset()) {
    return false;
  }
  for (int i = 0; i < a.jointCount(); ++i) {
    const JointSpec& ja = a.joint(i);
    const JointSpec& jb = b.joint(i);
    if (ja.name != jb.name || ja.parent != jb.parent || ja.dofs.size() != jb.dofs.size() ||
        !close(ja.bone_length, jb.bone_length)) {
      return false;
    }
    for (int k = 0; k < 3; ++k) {
      if (!close(ja.rest_offset[k], jb.rest_offset[k])) {
        return false;
      }
    }
    for (std::size_t s = 0; s < ja.dofs.size(); ++s) {
      const DofSpec& da = ja.dofs[s];
      const DofSpec& db = jb.dofs[s];
      if (da.kind != db.kind || da.axis != db.axis || !close(da.lower, db.lower) || !close(da.upper, db.upper)) {
        return false;
      }
    }
  }
  return true;
}

void saveSkeleton(const Skeleton& skeleton, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throwValidation("cannot write skeleton config '" + path.string() + "'");
  }
  out << skeletonToJson(skeleton);
}

const Skeleton& defaultHand() {
  static const Skeleton hand = parseSkeleton(detail::kHand23Config, "hand23");
  return hand;
}

Skeleton resolveSkeleton(const std::optional<std::filesystem::path>& path) {
  if (path) {
    return loadSkeleton(*path);
  }
  if (const char* env = std::getenv("KINEDEEP_SKELETON"); env != nullptr && *env != '\0') {
    return loadSkeleton(env);
  }
  return defaultHand();
}

void checkPoseSize(const Skeleton& skeleton, const PoseParams& theta) {
  if (theta.size() != skeleton.dofCount()) {
    throwValidation(
        "pose has " + std::to_string(theta.size()) + " values, skeleton '" + skeleton.name() + "' expects " +
        std::to_string(skeleton.dofCount()));
  }
}

PoseParams clampPose(const Skeleton& skeleton, const PoseParams& theta) {
  checkPoseSize(skeleton, theta);
  return theta.cwiseMax(skeleton.lowerBounds()).cwiseMin(skeleton.upperBounds());
}

PoseParams restPose(const Skeleton& skeleton) {
  return PoseParams::Zero(skeleton.dofCount());
}

}  // namespace kinedeep

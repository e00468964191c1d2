#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "kinedeep/types.h"

namespace kinedeep {

enum class DofKind { Translation, Rotation };
enum class Axis { X = 0, Y = 1, Z = 2 };

std::string_view toString(DofKind kind);
std::string_view toString(Axis axis);

/// One scalar degree of freedom. Bounds are in radians for rotations and
/// millimeters for translations.
struct DofSpec {
  DofKind kind = DofKind::Rotation;
  Axis axis = Axis::Z;
  double lower = 0.0;
  double upper = 0.0;

  double range() const {
    return upper - lower;
  }

  bool operator==(const DofSpec&) const = default;
};

/// A joint of the kinematic tree.
///
/// The joint sits at the end of a bone of length `bone_length` that leaves the
/// parent frame along +X after the fixed `rest_offset` rotation
/// (Rx * Ry * Rz, radians). The joint's own DOFs are then applied in listed
/// order, so they move descendants but never the joint itself, except for
/// translation DOFs (which are only allowed on the root).
struct JointSpec {
  std::string name;
  int parent = -1;
  double bone_length = 0.0;
  Eigen::Vector3d rest_offset = Eigen::Vector3d::Zero();
  std::vector<DofSpec> dofs;

  bool operator==(const JointSpec&) const = default;
};

/// Position of a DOF inside the joint list.
struct DofRef {
  int joint = 0;
  int slot = 0;

  bool operator==(const DofRef&) const = default;
};

/// Immutable, validated kinematic tree.
class Skeleton {
 public:
  /// Validates and takes ownership of the joint list. `eval_subset` holds
  /// joint indices; empty means every joint.
  Skeleton(std::string name, std::vector<JointSpec> joints, std::vector<int> eval_subset);

  const std::string& name() const {
    return name_;
  }
  const std::vector<JointSpec>& joints() const {
    return joints_;
  }
  const JointSpec& joint(int index) const {
    return joints_[static_cast<std::size_t>(index)];
  }
  int jointCount() const {
    return static_cast<int>(joints_.size());
  }
  int dofCount() const {
    return static_cast<int>(dofIndex_.size());
  }
  const std::vector<DofRef>& dofIndex() const {
    return dofIndex_;
  }
  const DofSpec& dof(int d) const;
  /// Index of the joint's first DOF in the flat pose vector.
  int firstDof(int joint) const {
    return firstDof_[static_cast<std::size_t>(joint)];
  }
  const std::vector<int>& evalSubset() const {
    return evalSubset_;
  }
  int evalCount() const {
    return static_cast<int>(evalSubset_.size());
  }
  /// Joint itself followed by all of its descendants, in topological order.
  const std::vector<int>& subtree(int joint) const {
    return subtree_[static_cast<std::size_t>(joint)];
  }
  bool isAncestorOrSelf(int ancestor, int joint) const;
  std::optional<int> findJoint(std::string_view name) const;

  /// Per-DOF bound vectors.
  const PoseParams& lowerBounds() const {
    return lower_;
  }
  const PoseParams& upperBounds() const {
    return upper_;
  }

 private:
  std::string name_;
  std::vector<JointSpec> joints_;
  std::vector<int> evalSubset_;
  std::vector<DofRef> dofIndex_;
  std::vector<int> firstDof_;
  std::vector<std::vector<int>> subtree_;
  PoseParams lower_;
  PoseParams upper_;
};

/// Parses a skeleton config document (JSON). Angles in the document are in
/// degrees; translation bounds in millimeters.
Skeleton parseSkeleton(std::string_view json_text, std::string default_name = "skeleton");
Skeleton loadSkeleton(const std::filesystem::path& path);

std::string skeletonToJson(const Skeleton& skeleton);
/// Same topology, names, DOF kinds/axes and eval subset; numeric fields equal
/// up to `tolerance` (degree/radian conversion is not bit-exact).
bool structurallyEqual(const Skeleton& a, const Skeleton& b, double tolerance = 1e-12);
void saveSkeleton(const Skeleton& skeleton, const std::filesystem::path& path);

/// Built-in 23-joint, 26-DOF hand.
const Skeleton& defaultHand();

/// Loads `path` if given, else the file named by $KINEDEEP_SKELETON, else the
/// built-in hand.
Skeleton resolveSkeleton(const std::optional<std::filesystem::path>& path);

/// Projects every component of `theta` into its [lower, upper] box.
PoseParams clampPose(const Skeleton& skeleton, const PoseParams& theta);

/// The all-zero canonical pose.
PoseParams restPose(const Skeleton& skeleton);

void checkPoseSize(const Skeleton& skeleton, const PoseParams& theta);

}  // namespace kinedeep

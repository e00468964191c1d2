#pragma once

#include <numbers>
#include <string>
#include <vector>

#include "kinedeep/skeleton.h"

namespace kinedeep::testing {

inline double deg(double degrees) {
  return degrees * std::numbers::pi / 180.0;
}

inline DofSpec rotation(Axis axis, double lower_deg, double upper_deg) {
  return {DofKind::Rotation, axis, deg(lower_deg), deg(upper_deg)};
}

// Fixed root and a chain of joints along +X, one per length. Every joint but
// the last (the tip) rotates about Z over [lower_deg, upper_deg].
inline Skeleton planarChain(const std::vector<double>& lengths, double lower_deg = -180.0, double upper_deg = 180.0) {
  std::vector<JointSpec> joints;
  joints.push_back({"root", -1, 0.0, Eigen::Vector3d::Zero(), {}});
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    JointSpec joint{"j" + std::to_string(i + 1), static_cast<int>(i), lengths[i], Eigen::Vector3d::Zero(), {}};
    if (i + 1 < lengths.size()) {
      joint.dofs.push_back(rotation(Axis::Z, lower_deg, upper_deg));
    }
    joints.push_back(joint);
  }
  return Skeleton("chain", std::move(joints), {});
}

// Root carrying the full 6-DOF global transform and nothing else.
inline Skeleton rootOnly() {
  std::vector<DofSpec> dofs = {
      {DofKind::Translation, Axis::X, -200.0, 200.0},
      {DofKind::Translation, Axis::Y, -200.0, 200.0},
      {DofKind::Translation, Axis::Z, -200.0, 200.0},
      rotation(Axis::X, -180.0, 180.0),
      rotation(Axis::Y, -180.0, 180.0),
      rotation(Axis::Z, -180.0, 180.0),
  };
  return Skeleton("root_only", {{"root", -1, 0.0, Eigen::Vector3d::Zero(), dofs}}, {});
}

}  // namespace kinedeep::testing

#pragma once

#include <vector>

#include "kinedeep/skeleton.h"
#include "kinedeep/types.h"

namespace kinedeep {

/// Right-handed rotation by `angle` radians about `axis`.
Transform4 rot(Axis axis, double angle);
/// Translation by `length` millimeters along `axis`.
Transform4 trans(Axis axis, double length);
/// Elementwise d/d(angle) of rot(axis, angle). Not a rigid transform: the
/// bottom row is zero.
Transform4 drot(Axis axis, double angle);
/// d/d(length) of trans(axis, length); constant.
Transform4 dtrans(Axis axis);

/// Fixed rotation Rx(a) * Ry(b) * Rz(c) for offsets (a, b, c).
Transform4 restOffsetTransform(const Eigen::Vector3d& offset);

/// rot or trans, depending on the DOF kind.
Transform4 dofTransform(const DofSpec& dof, double value);
/// drot or dtrans, depending on the DOF kind.
Transform4 dofDerivative(const DofSpec& dof, double value);

/// F(theta): global joint positions.
JointSet forwardKinematics(const Skeleton& skeleton, const PoseParams& theta);

struct FkResult {
  JointSet joints;
  KinematicsJacobian jacobian;
};

/// F(theta) and dF/dtheta. Column d is nonzero only on rows of joints inside
/// the subtree of the joint owning DOF d.
FkResult fkJacobian(const Skeleton& skeleton, const PoseParams& theta);

/// Reusable scratch for hot loops (PSO fitness, training). Not thread-safe;
/// use one per thread.
class KinematicsWorkspace {
 public:
  explicit KinematicsWorkspace(const Skeleton& skeleton);

  /// Writes F(theta) into `joints` (resized as needed).
  void forward(const PoseParams& theta, JointSet& joints);
  /// Writes F(theta) and its Jacobian.
  void forwardWithJacobian(const PoseParams& theta, JointSet& joints, KinematicsJacobian& jacobian);

  const Skeleton& skeleton() const {
    return *skeleton_;
  }

 private:
  void computeFrames(const PoseParams& theta, bool keep_dof_frames);

  const Skeleton* skeleton_;
  std::vector<Transform4> restFrames_;  // rest offset * bone translation, per joint
  std::vector<Transform4> jointFrames_;
  // Per DOF: the frame just before and just after the DOF's own transform.
  std::vector<Transform4> beforeDof_;
  std::vector<Transform4> afterDof_;
};

}  // namespace kinedeep

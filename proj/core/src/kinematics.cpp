#include "kinedeep/kinematics.h"

#include <cmath>
#include <string>

#include "kinedeep/error.h"

namespace kinedeep {

namespace {

// Inverse of a transform whose upper-left block is a rotation.
Transform4 rigidInverse(const Transform4& m) {
  Transform4 inv = Transform4::Identity();
  inv.topLeftCorner<3, 3>() = m.topLeftCorner<3, 3>().transpose();
  inv.topRightCorner<3, 1>() = -inv.topLeftCorner<3, 3>() * m.topRightCorner<3, 1>();
  return inv;
}

void checkFinitePose(const Skeleton& skeleton, const PoseParams& theta) {
  checkPoseSize(skeleton, theta);
  for (Eigen::Index d = 0; d < theta.size(); ++d) {
    if (!std::isfinite(theta[d])) {
      throwValidation("pose component " + std::to_string(d) + " is not finite");
    }
  }
}

}  // namespace

Transform4 rot(Axis axis, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Transform4 m = Transform4::Identity();
  switch (axis) {
    case Axis::X:
      m(1, 1) = c;
      m(1, 2) = -s;
      m(2, 1) = s;
      m(2, 2) = c;
      break;
    case Axis::Y:
      m(0, 0) = c;
      m(0, 2) = s;
      m(2, 0) = -s;
      m(2, 2) = c;
      break;
    case Axis::Z:
      m(0, 0) = c;
      m(0, 1) = -s;
      m(1, 0) = s;
      m(1, 1) = c;
      break;
  }
  return m;
}

Transform4 trans(Axis axis, double length) {
  Transform4 m = Transform4::Identity();
  m(static_cast<int>(axis), 3) = length;
  return m;
}

Transform4 drot(Axis axis, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Transform4 m = Transform4::Zero();
  switch (axis) {
    case Axis::X:
      m(1, 1) = -s;
      m(1, 2) = -c;
      m(2, 1) = c;
      m(2, 2) = -s;
      break;
    case Axis::Y:
      m(0, 0) = -s;
      m(0, 2) = c;
      m(2, 0) = -c;
      m(2, 2) = -s;
      break;
    case Axis::Z:
      m(0, 0) = -s;
      m(0, 1) = -c;
      m(1, 0) = c;
      m(1, 1) = -s;
      break;
  }
  return m;
}

Transform4 dtrans(Axis axis) {
  Transform4 m = Transform4::Zero();
  m(static_cast<int>(axis), 3) = 1.0;
  return m;
}

Transform4 restOffsetTransform(const Eigen::Vector3d& offset) {
  if (offset.isZero(0.0)) {
    return Transform4::Identity();
  }
  return rot(Axis::X, offset.x()) * rot(Axis::Y, offset.y()) * rot(Axis::Z, offset.z());
}

Transform4 dofTransform(const DofSpec& dof, double value) {
  return dof.kind == DofKind::Rotation ? rot(dof.axis, value) : trans(dof.axis, value);
}

Transform4 dofDerivative(const DofSpec& dof, double value) {
  return dof.kind == DofKind::Rotation ? drot(dof.axis, value) : dtrans(dof.axis);
}

KinematicsWorkspace::KinematicsWorkspace(const Skeleton& skeleton)
    : skeleton_(&skeleton),
      restFrames_(static_cast<std::size_t>(skeleton.jointCount())),
      jointFrames_(static_cast<std::size_t>(skeleton.jointCount())),
      beforeDof_(static_cast<std::size_t>(skeleton.dofCount())),
      afterDof_(static_cast<std::size_t>(skeleton.dofCount())) {
  for (int j = 0; j < skeleton.jointCount(); ++j) {
    const JointSpec& joint = skeleton.joint(j);
    restFrames_[static_cast<std::size_t>(j)] =
        restOffsetTransform(joint.rest_offset) * trans(Axis::X, joint.bone_length);
  }
}

// Global frame of joint u:
//   G(u) = G(parent) * RestOffset(u) * Trans_x(bone_length(u)) * M_1(theta_1) * ... * M_k(theta_k)
// with the joint's DOF transforms M_i multiplied in listed order. The joint
// position is G(u) applied to the origin. Parents precede children, so one
// forward sweep computes every shared prefix once.
void KinematicsWorkspace::computeFrames(const PoseParams& theta, bool keep_dof_frames) {
  const Skeleton& skel = *skeleton_;
  for (int j = 0; j < skel.jointCount(); ++j) {
    const JointSpec& joint = skel.joint(j);
    const auto ju = static_cast<std::size_t>(j);
    Transform4 frame = joint.parent < 0
        ? restFrames_[ju]
        : Transform4(jointFrames_[static_cast<std::size_t>(joint.parent)] * restFrames_[ju]);
    int d = skel.firstDof(j);
    for (const DofSpec& dof : joint.dofs) {
      const auto du = static_cast<std::size_t>(d);
      if (keep_dof_frames) {
        beforeDof_[du] = frame;
      }
      frame = frame * dofTransform(dof, theta[d]);
      if (keep_dof_frames) {
        afterDof_[du] = frame;
      }
      ++d;
    }
    jointFrames_[ju] = frame;
  }
}

void KinematicsWorkspace::forward(const PoseParams& theta, JointSet& joints) {
  checkFinitePose(*skeleton_, theta);
  computeFrames(theta, false);
  joints.resize(skeleton_->jointCount(), 3);
  for (int j = 0; j < skeleton_->jointCount(); ++j) {
    joints.row(j) = jointFrames_[static_cast<std::size_t>(j)].topRightCorner<3, 1>().transpose();
  }
}

// Derivative rule: the position of a joint in the subtree of DOF d is
//   p = Before(d) * M_d(theta_d) * q,  q = After(d)^-1 * p  (local coordinates),
// so dp/dtheta_d = Before(d) * M_d'(theta_d) * q: the DOF's matrix is replaced
// by its derivative while every other factor of the chain is kept.
void KinematicsWorkspace::forwardWithJacobian(
    const PoseParams& theta,
    JointSet& joints,
    KinematicsJacobian& jacobian) {
  checkFinitePose(*skeleton_, theta);
  computeFrames(theta, true);
  const Skeleton& skel = *skeleton_;
  const int jointCount = skel.jointCount();
  joints.resize(jointCount, 3);
  for (int j = 0; j < jointCount; ++j) {
    joints.row(j) = jointFrames_[static_cast<std::size_t>(j)].topRightCorner<3, 1>().transpose();
  }

  jacobian.setZero(3 * jointCount, skel.dofCount());
  for (int d = 0; d < skel.dofCount(); ++d) {
    const DofRef& ref = skel.dofIndex()[static_cast<std::size_t>(d)];
    const DofSpec& dof = skel.dof(d);
    const auto du = static_cast<std::size_t>(d);
    const Transform4 toLocal = rigidInverse(afterDof_[du]);
    const Transform4 derivative = beforeDof_[du] * dofDerivative(dof, theta[d]);
    for (int u : skel.subtree(ref.joint)) {
      Eigen::Vector4d p;
      p << joints.row(u).transpose(), 1.0;
      const Eigen::Vector4d local = toLocal * p;
      jacobian.block<3, 1>(3 * u, d) = (derivative * local).head<3>();
    }
  }
}

JointSet forwardKinematics(const Skeleton& skeleton, const PoseParams& theta) {
  KinematicsWorkspace workspace(skeleton);
  JointSet joints;
  workspace.forward(theta, joints);
  return joints;
}

FkResult fkJacobian(const Skeleton& skeleton, const PoseParams& theta) {
  KinematicsWorkspace workspace(skeleton);
  FkResult result;
  workspace.forwardWithJacobian(theta, result.joints, result.jacobian);
  return result;
}

}  // namespace kinedeep

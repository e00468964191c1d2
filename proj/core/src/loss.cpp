#include "kinedeep/loss.h"

#include <cmath>
#include <string>

#include "kinedeep/error.h"

namespace kinedeep {

void checkJointSetSize(const Skeleton& skeleton, const JointSet& joints) {
  if (joints.rows() != skeleton.jointCount()) {
    throwValidation(
        "joint set has " + std::to_string(joints.rows()) + " joints, skeleton '" + skeleton.name() + "' has " +
        std::to_string(skeleton.jointCount()));
  }
}

LossValue jointLoss(const Skeleton& skeleton, const FkResult& fk, const JointSet& target) {
  checkJointSetSize(skeleton, target);
  LossValue out;
  out.grad = Eigen::VectorXd::Zero(skeleton.dofCount());
  for (int u : skeleton.evalSubset()) {
    const Eigen::RowVector3d residual = fk.joints.row(u) - target.row(u);
    out.value += 0.5 * residual.squaredNorm();
    out.grad.noalias() += fk.jacobian.middleRows<3>(3 * u).transpose() * residual.transpose();
  }
  return out;
}

LossValue jointLoss(const Skeleton& skeleton, const PoseParams& theta, const JointSet& target) {
  checkJointSetSize(skeleton, target);
  return jointLoss(skeleton, fkJacobian(skeleton, theta), target);
}

LossValue phyLoss(const Skeleton& skeleton, const PoseParams& theta) {
  checkPoseSize(skeleton, theta);
  LossValue out;
  out.grad = Eigen::VectorXd::Zero(skeleton.dofCount());
  for (int d = 0; d < skeleton.dofCount(); ++d) {
    const DofSpec& dof = skeleton.dof(d);
    if (dof.kind != DofKind::Rotation) {
      continue;
    }
    if (theta[d] < dof.lower) {
      out.value += dof.lower - theta[d];
      out.grad[d] = -1.0;
    } else if (theta[d] > dof.upper) {
      out.value += theta[d] - dof.upper;
      out.grad[d] = 1.0;
    }
  }
  return out;
}

LossReport totalLoss(const Skeleton& skeleton, const PoseParams& theta, const JointSet& target, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throwValidation("lambda must be a finite non-negative number");
  }
  const LossValue joint = jointLoss(skeleton, theta, target);
  const LossValue phy = phyLoss(skeleton, theta);
  LossReport report;
  report.l_jt = joint.value;
  report.l_phy = phy.value;
  report.lambda = lambda;
  report.total = joint.value + lambda * phy.value;
  report.grad = joint.grad + lambda * phy.grad;
  return report;
}

bool hasInvalidAngle(const Skeleton& skeleton, const PoseParams& theta) {
  checkPoseSize(skeleton, theta);
  for (int d = 0; d < skeleton.dofCount(); ++d) {
    const DofSpec& dof = skeleton.dof(d);
    if (dof.kind == DofKind::Rotation && (theta[d] < dof.lower || theta[d] > dof.upper)) {
      return true;
    }
  }
  return false;
}

}  // namespace kinedeep

#pragma once

#include "kinedeep/kinematics.h"
#include "kinedeep/skeleton.h"
#include "kinedeep/types.h"

namespace kinedeep {

/// Weight of the physical-constraint term used throughout training.
inline constexpr double kDefaultLambda = 1.0;

struct LossValue {
  double value = 0.0;
  Eigen::VectorXd grad;
};

struct LossReport {
  double l_jt = 0.0;   // mm^2
  double l_phy = 0.0;  // radians
  double total = 0.0;
  double lambda = kDefaultLambda;
  Eigen::VectorXd grad;
};

/// 1/2 * sum over eval joints of |F(theta) - Y|^2 and its gradient J^T r.
/// `target` must have one row per skeleton joint; only eval rows are read.
LossValue jointLoss(const Skeleton& skeleton, const PoseParams& theta, const JointSet& target);
/// Same, reusing an already computed F(theta) and Jacobian.
LossValue jointLoss(const Skeleton& skeleton, const FkResult& fk, const JointSet& target);

/// Hinge penalty on rotation DOFs outside their bounds, with subgradient
/// -1 below, +1 above and 0 inside or exactly on a bound. Translation DOFs are
/// not penalized.
LossValue phyLoss(const Skeleton& skeleton, const PoseParams& theta);

/// l_jt + lambda * l_phy.
LossReport totalLoss(
    const Skeleton& skeleton,
    const PoseParams& theta,
    const JointSet& target,
    double lambda = kDefaultLambda);

/// True if some rotation DOF lies strictly outside its bounds.
bool hasInvalidAngle(const Skeleton& skeleton, const PoseParams& theta);

void checkJointSetSize(const Skeleton& skeleton, const JointSet& joints);

}  // namespace kinedeep

#include "kinedeep/ik_pso.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "kinedeep/error.h"
#include "kinedeep/kinematics.h"
#include "kinedeep/loss.h"

namespace kinedeep {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Rotation DOFs whose bounds span a full turn have no wall; positions wrap
// across the seam instead of being clamped.
std::vector<bool> periodicDofs(const Skeleton& skeleton) {
  std::vector<bool> periodic(static_cast<std::size_t>(skeleton.dofCount()));
  for (int d = 0; d < skeleton.dofCount(); ++d) {
    const DofSpec& dof = skeleton.dof(d);
    periodic[static_cast<std::size_t>(d)] = dof.kind == DofKind::Rotation && dof.range() >= kTwoPi - 1e-9;
  }
  return periodic;
}

double wrapAngle(double x, double lower) {
  return x - kTwoPi * std::floor((x - lower) / kTwoPi);
}

PoseParams projectPose(const Skeleton& skeleton, const std::vector<bool>& periodic, const PoseParams& theta) {
  PoseParams out = clampPose(skeleton, theta);
  for (int d = 0; d < skeleton.dofCount(); ++d) {
    if (periodic[static_cast<std::size_t>(d)]) {
      out[d] = wrapAngle(theta[d], skeleton.lowerBounds()[d]);
    }
  }
  return out;
}

double evalLoss(const Skeleton& skeleton, const JointSet& joints, const JointSet& target) {
  double loss = 0.0;
  for (int u : skeleton.evalSubset()) {
    loss += 0.5 * (joints.row(u) - target.row(u)).squaredNorm();
  }
  return loss;
}

double meanResidual(const Skeleton& skeleton, const JointSet& joints, const JointSet& target) {
  double sum = 0.0;
  for (int u : skeleton.evalSubset()) {
    sum += (joints.row(u) - target.row(u)).norm();
  }
  return sum / skeleton.evalCount();
}

void checkTarget(const Skeleton& skeleton, const JointSet& target) {
  checkJointSetSize(skeleton, target);
  for (int u : skeleton.evalSubset()) {
    if (!target.row(u).allFinite()) {
      throwValidation("target joint '" + skeleton.joint(u).name + "' is not finite");
    }
  }
}

// Projected Levenberg-Marquardt on the eval-joint residual. Steps that do not
// lower the loss are rejected, so the result never gets worse than `start`.
PoseParams polishPose(
    const Skeleton& skeleton,
    const JointSet& target,
    const PoseParams& start,
    double start_loss,
    int steps,
    KinematicsWorkspace& kinematics) {
  const int dofs = skeleton.dofCount();
  const std::vector<bool> periodic = periodicDofs(skeleton);
  const int rows = 3 * skeleton.evalCount();
  PoseParams theta = start;
  double loss = start_loss;
  double damping = 1e-3;
  JointSet joints;
  KinematicsJacobian jacobian;
  Eigen::MatrixXd evalJacobian(rows, dofs);
  Eigen::VectorXd residual(rows);
  for (int step = 0; step < steps; ++step) {
    kinematics.forwardWithJacobian(theta, joints, jacobian);
    int r = 0;
    for (int u : skeleton.evalSubset()) {
      evalJacobian.middleRows<3>(r) = jacobian.middleRows<3>(3 * u);
      residual.segment<3>(r) = (joints.row(u) - target.row(u)).transpose();
      r += 3;
    }
    const Eigen::MatrixXd normal = evalJacobian.transpose() * evalJacobian;
    const Eigen::VectorXd gradient = evalJacobian.transpose() * residual;
    bool improved = false;
    for (int attempt = 0; attempt < 8 && !improved; ++attempt) {
      Eigen::MatrixXd system = normal;
      system.diagonal().array() += damping * (normal.diagonal().array() + 1.0);
      const PoseParams candidate = projectPose(skeleton, periodic, theta - system.ldlt().solve(gradient));
      kinematics.forward(candidate, joints);
      const double candidateLoss = evalLoss(skeleton, joints, target);
      if (candidateLoss < loss) {
        theta = candidate;
        loss = candidateLoss;
        damping = std::max(damping * 0.3, 1e-9);
        improved = true;
      } else {
        damping *= 10.0;
      }
    }
    if (!improved) {
      break;
    }
  }
  return theta;
}

}  // namespace

void validatePsoConfig(const PsoConfig& config) {
  if (config.swarm_size < 2) {
    throwValidation("PSO swarm size must be at least 2");
  }
  if (config.iterations < 1) {
    throwValidation("PSO needs at least one iteration");
  }
  if (!(config.inertia >= 0.0 && config.inertia < 1.0)) {
    throwValidation("PSO inertia must lie in [0, 1)");
  }
  if (!(config.cognitive >= 0.0) || !(config.social >= 0.0)) {
    throwValidation("PSO cognitive and social weights must be non-negative");
  }
  if (!(config.init_sigma_fraction >= 0.0) || !(config.max_velocity_fraction > 0.0)) {
    throwValidation("PSO init sigma must be non-negative and velocity cap positive");
  }
  if (config.polish && config.polish_steps < 0) {
    throwValidation("polish steps must be non-negative");
  }
}

double jointResidualMm(const Skeleton& skeleton, const PoseParams& theta, const JointSet& target) {
  checkJointSetSize(skeleton, target);
  return meanResidual(skeleton, forwardKinematics(skeleton, theta), target);
}

namespace {

// A subset of DOFs searched by one swarm, scored on a subset of eval joints.
struct Stage {
  std::vector<int> dofs;
  std::vector<int> joints;
};

// Root stage plus one stage per branch. A branch starts at a DOF-bearing
// joint whose strict ancestors (other than the root) carry no DOFs; it owns
// every DOF in its subtree and every eval joint whose position depends on
// them. The joint loss is the exact sum of the stage losses.
struct StagePlan {
  Stage root;
  std::vector<Stage> branches;
  bool usable = false;
};

StagePlan planStages(const Skeleton& skeleton) {
  const int joints = skeleton.jointCount();
  std::vector<int> head(static_cast<std::size_t>(joints), -1);
  for (int u = 1; u < joints; ++u) {
    const int parent = skeleton.joint(u).parent;
    if (parent <= 0) {
      continue;
    }
    const int parentHead = head[static_cast<std::size_t>(parent)];
    head[static_cast<std::size_t>(u)] =
        parentHead >= 0 ? parentHead : (skeleton.joint(parent).dofs.empty() ? -1 : parent);
  }

  StagePlan plan;
  const int rootDofs = static_cast<int>(skeleton.joint(0).dofs.size());
  for (int d = 0; d < rootDofs; ++d) {
    plan.root.dofs.push_back(skeleton.firstDof(0) + d);
  }
  std::vector<int> branchOf(static_cast<std::size_t>(joints), -1);
  for (int b = 1; b < joints; ++b) {
    if (head[static_cast<std::size_t>(b)] >= 0 || skeleton.joint(b).dofs.empty()) {
      continue;
    }
    branchOf[static_cast<std::size_t>(b)] = static_cast<int>(plan.branches.size());
    Stage branch;
    for (int u : skeleton.subtree(b)) {
      for (std::size_t k = 0; k < skeleton.joint(u).dofs.size(); ++k) {
        branch.dofs.push_back(skeleton.firstDof(u) + static_cast<int>(k));
      }
    }
    plan.branches.push_back(std::move(branch));
  }
  for (int u : skeleton.evalSubset()) {
    const int h = head[static_cast<std::size_t>(u)];
    if (h < 0) {
      plan.root.joints.push_back(u);
    } else {
      plan.branches[static_cast<std::size_t>(branchOf[static_cast<std::size_t>(h)])].joints.push_back(u);
    }
  }
  plan.usable = (plan.root.dofs.empty() || !plan.root.joints.empty()) && !plan.branches.empty();
  for (const Stage& branch : plan.branches) {
    plan.usable = plan.usable && !branch.joints.empty();
  }
  return plan;
}

enum class Spread { Uniform, UniformWithBase, Gaussian };

class Swarm {
 public:
  Swarm(const Skeleton& skeleton, const JointSet& target, const PsoConfig& config)
      : skeleton_(skeleton), target_(target), config_(config), rng_(config.seed), periodic_(periodicDofs(skeleton)), kinematics_(skeleton) {}

  // Searches `stage.dofs` with every other DOF held at `base`; returns the
  // best full pose found and the number of iterations run. When `history` is
  // given, the full joint loss of the best pose is appended after every
  // iteration (and once at the start).
  PoseParams run(
      const Stage& stage,
      const PoseParams& base,
      Spread spread,
      double sigma_fraction,
      int iterations,
      int& iterations_used,
      std::vector<double>* history) {
    const int dims = static_cast<int>(stage.dofs.size());
    const int swarm = config_.swarm_size;
    const PoseParams& lower = skeleton_.lowerBounds();
    const PoseParams& upper = skeleton_.upperBounds();

    Eigen::MatrixXd position(dims, swarm);
    Eigen::MatrixXd velocity = Eigen::MatrixXd::Zero(dims, swarm);
    for (int p = 0; p < swarm; ++p) {
      for (int k = 0; k < dims; ++k) {
        const int d = stage.dofs[static_cast<std::size_t>(k)];
        const double range = upper[d] - lower[d];
        if (p == 0 && spread != Spread::Uniform) {
          position(k, p) = base[d];
        } else if (spread == Spread::Gaussian) {
          const double x = base[d] + sigma_fraction * range * gauss_(rng_);
          position(k, p) = periodic_[static_cast<std::size_t>(d)] ? wrapAngle(x, lower[d]) : std::clamp(x, lower[d], upper[d]);
        } else {
          position(k, p) = lower[d] + range * unit_(rng_);
        }
      }
    }

    PoseParams pose = base;
    const auto stageLoss = [&](const auto& column) {
      for (int k = 0; k < dims; ++k) {
        pose[stage.dofs[static_cast<std::size_t>(k)]] = column[k];
      }
      kinematics_.forward(pose, joints_);
      double loss = 0.0;
      for (int u : stage.joints) {
        loss += 0.5 * (joints_.row(u) - target_.row(u)).squaredNorm();
      }
      return loss;
    };
    const auto stageResidual = [&](const auto& column) {
      stageLoss(column);
      double sum = 0.0;
      for (int u : stage.joints) {
        sum += (joints_.row(u) - target_.row(u)).norm();
      }
      return stage.joints.empty() ? 0.0 : sum / static_cast<double>(stage.joints.size());
    };

    Eigen::MatrixXd personalBest = position;
    Eigen::VectorXd personalLoss(swarm);
    int best = 0;
    for (int p = 0; p < swarm; ++p) {
      personalLoss[p] = stageLoss(position.col(p));
      if (personalLoss[p] < personalLoss[best]) {
        best = p;
      }
    }
    Eigen::VectorXd globalBest = personalBest.col(best);
    double globalLoss = personalLoss[best];

    // Full eval-joint loss of the assembled pose. Recorded as a running
    // minimum so the stage-local and full sums cannot disagree by rounding.
    const auto recordFullLoss = [&]() {
      PoseParams full = base;
      for (int k = 0; k < dims; ++k) {
        full[stage.dofs[static_cast<std::size_t>(k)]] = globalBest[k];
      }
      kinematics_.forward(full, joints_);
      double total = 0.0;
      for (int u : skeleton_.evalSubset()) {
        total += 0.5 * (joints_.row(u) - target_.row(u)).squaredNorm();
      }
      history->push_back(history->empty() ? total : std::min(history->back(), total));
    };
    if (history != nullptr) {
      recordFullLoss();
    }

    int iteration = 0;
    bool done = stageResidual(globalBest) <= config_.tolerance_mm;
    while (!done && iteration < iterations) {
      ++iteration;
      for (int p = 0; p < swarm; ++p) {
        for (int k = 0; k < dims; ++k) {
          const int d = stage.dofs[static_cast<std::size_t>(k)];
          const double vmax = config_.max_velocity_fraction * (upper[d] - lower[d]);
          const double r1 = unit_(rng_);
          const double r2 = unit_(rng_);
          const bool wraps = periodic_[static_cast<std::size_t>(d)];
          const auto toward = [&](double goal) {
            const double diff = goal - position(k, p);
            return wraps ? std::remainder(diff, kTwoPi) : diff;
          };
          double v = config_.inertia * velocity(k, p) + config_.cognitive * r1 * toward(personalBest(k, p)) +
              config_.social * r2 * toward(globalBest[k]);
          v = std::clamp(v, -vmax, vmax);
          double x = position(k, p) + v;
          if (wraps) {
            x = wrapAngle(x, lower[d]);
          } else if (x < lower[d]) {
            x = lower[d];
            v = 0.0;
          } else if (x > upper[d]) {
            x = upper[d];
            v = 0.0;
          }
          position(k, p) = x;
          velocity(k, p) = v;
        }
        const double loss = stageLoss(position.col(p));
        if (loss < personalLoss[p]) {
          personalLoss[p] = loss;
          personalBest.col(p) = position.col(p);
        }
      }
      // Ordered reduction: ties keep the lowest particle index.
      int bestIndex = 0;
      for (int p = 1; p < swarm; ++p) {
        if (personalLoss[p] < personalLoss[bestIndex]) {
          bestIndex = p;
        }
      }
      const bool improved = personalLoss[bestIndex] < globalLoss;
      if (improved) {
        globalLoss = personalLoss[bestIndex];
        globalBest = personalBest.col(bestIndex);
      }
      if (history != nullptr) {
        if (improved) {
          recordFullLoss();
        } else {
          history->push_back(history->back());
        }
      }
      done = stageResidual(globalBest) <= config_.tolerance_mm;
    }
    iterations_used += iteration;

    PoseParams result = base;
    for (int k = 0; k < dims; ++k) {
      result[stage.dofs[static_cast<std::size_t>(k)]] = globalBest[k];
    }
    return result;
  }

  KinematicsWorkspace& kinematics() {
    return kinematics_;
  }

 private:
  const Skeleton& skeleton_;
  const JointSet& target_;
  const PsoConfig& config_;
  std::mt19937_64 rng_;
  std::vector<bool> periodic_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> gauss_{0.0, 1.0};
  KinematicsWorkspace kinematics_;
  JointSet joints_;
};

}  // namespace

FitResult fitPose(const Skeleton& skeleton, const JointSet& target, const PsoConfig& config) {
  validatePsoConfig(config);
  checkTarget(skeleton, target);
  if (config.init_center) {
    checkPoseSize(skeleton, *config.init_center);
  }

  Stage all;
  for (int d = 0; d < skeleton.dofCount(); ++d) {
    all.dofs.push_back(d);
  }
  all.joints = skeleton.evalSubset();

  const bool centered = config.init_center.has_value();
  const PoseParams center = clampPose(skeleton, centered ? *config.init_center : restPose(skeleton));
  const Spread startSpread = centered ? Spread::Gaussian : Spread::Uniform;

  Swarm swarm(skeleton, target, config);
  FitResult result;
  int iterations = 0;
  PoseParams best;

  const StagePlan plan = planStages(skeleton);
  if (config.hierarchical && plan.usable && config.iterations >= 3) {
    const int stageBudget = config.iterations / 3;
    best = center;
    if (!plan.root.dofs.empty()) {
      best = swarm.run(plan.root, best, startSpread, config.init_sigma_fraction, stageBudget, iterations, nullptr);
    }
    const Spread branchSpread = centered ? Spread::Gaussian : Spread::UniformWithBase;
    for (const Stage& branch : plan.branches) {
      best = swarm.run(
          branch, best, branchSpread, config.init_sigma_fraction, stageBudget, iterations, &result.best_loss_history);
    }
    best = swarm.run(
        all, best, Spread::Gaussian, config.refine_sigma_fraction, config.iterations - 2 * stageBudget, iterations,
        &result.best_loss_history);
  } else {
    best = swarm.run(all, center, startSpread, config.init_sigma_fraction, config.iterations, iterations,
                     &result.best_loss_history);
  }

  double residual = jointResidualMm(skeleton, best, target);
  if (config.polish && residual > config.tolerance_mm) {
    KinematicsWorkspace& kinematics = swarm.kinematics();
    JointSet joints;
    kinematics.forward(best, joints);
    best = polishPose(skeleton, target, best, evalLoss(skeleton, joints, target), config.polish_steps, kinematics);
    residual = jointResidualMm(skeleton, best, target);
  }

  result.theta = best;
  result.residual_mm = residual;
  result.iterations_used = iterations;
  result.converged = residual <= config.tolerance_mm;
  return result;
}

FitResult anglesFromJoints(const Skeleton& skeleton, const JointSet& predicted_joints, const PsoConfig& config) {
  return fitPose(skeleton, predicted_joints, config);
}

BatchFitResult fitBatch(
    const Skeleton& skeleton,
    std::span<const JointSet> targets,
    const PsoConfig& config,
    bool warm_start) {
  if (targets.empty()) {
    throwValidation("fitBatch needs at least one frame");
  }
  BatchFitResult batch;
  PsoConfig frameConfig = config;
  for (const JointSet& target : targets) {
    FitResult fit = fitPose(skeleton, target, frameConfig);
    if (warm_start) {
      frameConfig.init_center = fit.theta;
    }
    batch.total_iterations += fit.iterations_used;
    batch.frames.push_back(std::move(fit));
  }
  const double n = static_cast<double>(batch.frames.size());
  for (const FitResult& fit : batch.frames) {
    batch.mean_residual_mm += fit.residual_mm / n;
  }
  for (const FitResult& fit : batch.frames) {
    const double delta = fit.residual_mm - batch.mean_residual_mm;
    batch.variance_residual_mm2 += delta * delta / n;
  }
  return batch;
}

}  // namespace kinedeep

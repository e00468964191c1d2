#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "kinedeep/skeleton.h"
#include "kinedeep/types.h"

namespace kinedeep {

struct PsoConfig {
  int swarm_size = 64;
  int iterations = 300;
  double inertia = 0.72;
  double cognitive = 1.49;
  double social = 1.49;
  std::uint64_t seed = 0;
  /// When set, particle 0 starts exactly here and the rest are Gaussian
  /// around it; otherwise particles start uniformly inside the bounds.
  std::optional<PoseParams> init_center;
  /// Per-DOF standard deviation of the Gaussian start, as a fraction of the
  /// DOF's range.
  double init_sigma_fraction = 0.1;
  /// Per-DOF velocity cap, as a fraction of the DOF's range.
  double max_velocity_fraction = 0.5;
  /// The fit stops early once the mean joint residual drops to this value.
  double tolerance_mm = 0.01;
  /// Split the iteration budget into a root-DOF swarm, one swarm per branch
  /// below the root, and a final swarm over every DOF. When false, a single
  /// swarm searches all DOFs for the whole budget.
  bool hierarchical = true;
  /// Gaussian spread of the final swarm around the staged solution, as a
  /// fraction of each DOF's range.
  double refine_sigma_fraction = 0.02;
  /// Projected Levenberg-Marquardt refinement of the swarm's best pose.
  bool polish = false;
  int polish_steps = 50;
};

struct FitResult {
  PoseParams theta;
  /// Mean Euclidean distance over eval joints between F(theta) and the target.
  double residual_mm = 0.0;
  int iterations_used = 0;
  bool converged = false;
  /// Global-best joint loss of the full pose, recorded whenever every DOF is
  /// under the swarm's control: after each iteration of a flat fit, or from
  /// the end of the root stage onward in a hierarchical fit.
  std::vector<double> best_loss_history;
};

struct BatchFitResult {
  std::vector<FitResult> frames;
  double mean_residual_mm = 0.0;
  double variance_residual_mm2 = 0.0;
  long total_iterations = 0;
};

void validatePsoConfig(const PsoConfig& config);

/// Minimizes the eval-joint loss 1/2 |F(theta) - Y|^2 over the bounded pose
/// box with particle swarm optimization. Deterministic given the seed.
FitResult fitPose(const Skeleton& skeleton, const JointSet& target, const PsoConfig& config);

/// fitPose applied to a possibly invalid predicted joint set; the residual
/// measures how far the prediction is from any model-generated pose.
FitResult anglesFromJoints(const Skeleton& skeleton, const JointSet& predicted_joints, const PsoConfig& config);

/// Frame-by-frame fitting. Every frame uses the configured seed. With
/// `warm_start`, frame k+1 starts around frame k's solution.
BatchFitResult fitBatch(
    const Skeleton& skeleton,
    std::span<const JointSet> targets,
    const PsoConfig& config,
    bool warm_start);

/// Mean eval-joint Euclidean distance between F(theta) and `target`.
double jointResidualMm(const Skeleton& skeleton, const PoseParams& theta, const JointSet& target);

}  // namespace kinedeep

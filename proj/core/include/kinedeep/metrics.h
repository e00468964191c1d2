#pragma once

#include <span>
#include <string>
#include <vector>

#include "kinedeep/dataset.h"
#include "kinedeep/skeleton.h"
#include "kinedeep/types.h"

namespace kinedeep {

struct ThresholdPoint {
  double threshold_mm = 0.0;
  double fraction = 0.0;
};

struct MetricsReport {
  int frames = 0;
  double avg_joint_error_mm = 0.0;
  /// Fraction of frames whose maximum eval-joint error is <= threshold.
  std::vector<ThresholdPoint> max_error_curve;
  /// Mean |angle difference| over rotation DOFs (global rotation included,
  /// translation excluded), degrees. NaN when no poses are available.
  double avg_angle_error_deg = 0.0;
  /// Fraction of frames with at least one rotation DOF out of bounds. NaN
  /// when no poses are available.
  double invalid_pose_fraction = 0.0;
};

/// 5, 10, ..., 80 mm.
std::vector<double> defaultThresholds();

/// Metrics for pose predictions.
MetricsReport evaluatePoses(
    const Skeleton& skeleton,
    std::span<const PoseParams> predictions,
    std::span<const Sample> ground_truth,
    std::span<const double> thresholds);

/// Metrics for joint-set predictions (only eval rows are read). Angle metrics
/// come from `fitted_poses` (poses fit to the predicted joints); pass an empty
/// span to leave them undefined.
MetricsReport evaluateJoints(
    const Skeleton& skeleton,
    std::span<const JointSet> predictions,
    std::span<const PoseParams> fitted_poses,
    std::span<const Sample> ground_truth,
    std::span<const double> thresholds);

/// Absolute angle difference wrapped into [0, pi].
double angleDistance(double a, double b);

std::string metricsToJson(const MetricsReport& report);
std::string metricsToTable(const MetricsReport& report);
std::string curveToCsv(const MetricsReport& report);

}  // namespace kinedeep

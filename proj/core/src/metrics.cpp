#include "kinedeep/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include <json.hpp>

#include "kinedeep/error.h"
#include "kinedeep/kinematics.h"
#include "kinedeep/loss.h"

namespace kinedeep {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void checkThresholds(std::span<const double> thresholds) {
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    if (!(thresholds[i - 1] <= thresholds[i])) {
      throwValidation("thresholds must be sorted ascending");
    }
  }
}

// Accumulates the joint metrics frame by frame, in a fixed order.
class JointErrorAccumulator {
 public:
  JointErrorAccumulator(const Skeleton& skeleton, std::span<const double> thresholds)
      : skeleton_(skeleton), thresholds_(thresholds), below_(thresholds.size(), 0) {}

  void add(const JointSet& predicted, const JointSet& truth) {
    double sum = 0.0;
    double worst = 0.0;
    for (int u : skeleton_.evalSubset()) {
      const double error = (predicted.row(u) - truth.row(u)).norm();
      sum += error;
      worst = std::max(worst, error);
    }
    meanSum_ += sum / skeleton_.evalCount();
    for (std::size_t t = 0; t < thresholds_.size(); ++t) {
      if (worst <= thresholds_[t]) {
        ++below_[t];
      }
    }
    ++frames_;
  }

  void finish(MetricsReport& report) const {
    report.frames = frames_;
    report.avg_joint_error_mm = frames_ > 0 ? meanSum_ / frames_ : 0.0;
    report.max_error_curve.clear();
    for (std::size_t t = 0; t < thresholds_.size(); ++t) {
      report.max_error_curve.push_back(
          {thresholds_[t], frames_ > 0 ? static_cast<double>(below_[t]) / frames_ : 0.0});
    }
  }

 private:
  const Skeleton& skeleton_;
  std::span<const double> thresholds_;
  std::vector<int> below_;
  double meanSum_ = 0.0;
  int frames_ = 0;
};

void angleMetrics(
    const Skeleton& skeleton,
    std::span<const PoseParams> poses,
    std::span<const Sample> truth,
    MetricsReport& report) {
  std::vector<int> rotations;
  for (int d = 0; d < skeleton.dofCount(); ++d) {
    if (skeleton.dof(d).kind == DofKind::Rotation) {
      rotations.push_back(d);
    }
  }
  double angleSum = 0.0;
  int invalid = 0;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    checkPoseSize(skeleton, poses[i]);
    double frameSum = 0.0;
    for (int d : rotations) {
      frameSum += angleDistance(poses[i][d], truth[i].gt_theta[d]);
    }
    angleSum += rotations.empty() ? 0.0 : frameSum / static_cast<double>(rotations.size());
    if (hasInvalidAngle(skeleton, poses[i])) {
      ++invalid;
    }
  }
  const double frames = static_cast<double>(poses.size());
  report.avg_angle_error_deg = poses.empty() ? 0.0 : angleSum / frames * 180.0 / std::numbers::pi;
  report.invalid_pose_fraction = poses.empty() ? 0.0 : invalid / frames;
}

std::string formatNumber(double value) {
  if (std::isnan(value)) {
    return "n/a";
  }
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.3f", value);
  return buffer;
}

}  // namespace

std::vector<double> defaultThresholds() {
  std::vector<double> thresholds;
  for (int mm = 5; mm <= 80; mm += 5) {
    thresholds.push_back(mm);
  }
  return thresholds;
}

double angleDistance(double a, double b) {
  const double diff = std::remainder(a - b, 2.0 * std::numbers::pi);
  return std::abs(diff);
}

MetricsReport evaluatePoses(
    const Skeleton& skeleton,
    std::span<const PoseParams> predictions,
    std::span<const Sample> ground_truth,
    std::span<const double> thresholds) {
  if (predictions.size() != ground_truth.size()) {
    throwValidation("prediction count does not match ground truth count");
  }
  checkThresholds(thresholds);
  KinematicsWorkspace kinematics(skeleton);
  JointErrorAccumulator joints(skeleton, thresholds);
  JointSet predicted;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    kinematics.forward(predictions[i], predicted);
    joints.add(predicted, ground_truth[i].gt_joints);
  }
  MetricsReport report;
  joints.finish(report);
  angleMetrics(skeleton, predictions, ground_truth, report);
  return report;
}

MetricsReport evaluateJoints(
    const Skeleton& skeleton,
    std::span<const JointSet> predictions,
    std::span<const PoseParams> fitted_poses,
    std::span<const Sample> ground_truth,
    std::span<const double> thresholds) {
  if (predictions.size() != ground_truth.size()) {
    throwValidation("prediction count does not match ground truth count");
  }
  if (!fitted_poses.empty() && fitted_poses.size() != ground_truth.size()) {
    throwValidation("fitted pose count does not match ground truth count");
  }
  checkThresholds(thresholds);
  JointErrorAccumulator joints(skeleton, thresholds);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    checkJointSetSize(skeleton, predictions[i]);
    joints.add(predictions[i], ground_truth[i].gt_joints);
  }
  MetricsReport report;
  joints.finish(report);
  if (fitted_poses.empty()) {
    report.avg_angle_error_deg = kNaN;
    report.invalid_pose_fraction = kNaN;
  } else {
    angleMetrics(skeleton, fitted_poses, ground_truth, report);
  }
  return report;
}

std::string metricsToJson(const MetricsReport& report) {
  using nlohmann::json;
  const auto orNull = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
  json doc;
  doc["frames"] = report.frames;
  doc["avg_joint_error_mm"] = report.avg_joint_error_mm;
  doc["avg_angle_error_deg"] = orNull(report.avg_angle_error_deg);
  doc["angle_error_scope"] = "rotation DOFs incl. global rotation; translation excluded";
  doc["invalid_pose_fraction"] = orNull(report.invalid_pose_fraction);
  json curve = json::array();
  for (const ThresholdPoint& point : report.max_error_curve) {
    curve.push_back({{"threshold_mm", point.threshold_mm}, {"fraction", point.fraction}});
  }
  doc["max_error_curve"] = std::move(curve);
  return doc.dump(2) + "\n";
}

std::string metricsToTable(const MetricsReport& report) {
  std::string out;
  out += "frames                  " + std::to_string(report.frames) + "\n";
  out += "avg joint error (mm)    " + formatNumber(report.avg_joint_error_mm) + "\n";
  out += "avg angle error (deg)   " + formatNumber(report.avg_angle_error_deg) + "\n";
  out += "invalid pose fraction   " + formatNumber(report.invalid_pose_fraction) + "\n";
  out += "max error <= threshold\n";
  for (const ThresholdPoint& point : report.max_error_curve) {
    char line[64];
    std::snprintf(line, sizeof(line), "  %6.1f mm  %.4f\n", point.threshold_mm, point.fraction);
    out += line;
  }
  return out;
}

std::string curveToCsv(const MetricsReport& report) {
  std::string out = "threshold_mm,fraction\n";
  for (const ThresholdPoint& point : report.max_error_curve) {
    char line[64];
    std::snprintf(line, sizeof(line), "%g,%.6f\n", point.threshold_mm, point.fraction);
    out += line;
  }
  return out;
}

}  // namespace kinedeep

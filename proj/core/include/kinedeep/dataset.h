#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "kinedeep/skeleton.h"
#include "kinedeep/types.h"

namespace kinedeep {

/// Feature value written for an occluded joint coordinate.
inline constexpr double kOccludedSentinel = -1000.0;

struct Sample {
  Eigen::VectorXd features;
  PoseParams gt_theta;
  JointSet gt_joints;
};

/// Per-DOF sampling window. Samplers intersect it with the skeleton bounds.
struct SamplingBox {
  PoseParams lower;
  PoseParams upper;
};

/// Skeleton bounds with the root's rotation DOFs narrowed to
/// [-half_range_deg, half_range_deg].
SamplingBox viewLimitedBox(const Skeleton& skeleton, double half_range_deg);

/// Uniform draw of every DOF within its bounds (and `box`, if given).
PoseParams samplePose(const Skeleton& skeleton, std::uint64_t seed);
PoseParams samplePose(const Skeleton& skeleton, std::mt19937_64& rng, const SamplingBox* box = nullptr);

struct DatasetConfig {
  int n = 1;
  double noise_sigma_mm = 0.0;
  double occlusion_prob = 0.0;
  std::uint64_t seed = 0;
  /// Features from eval joints only (default: every joint).
  bool eval_joints_only = false;
  std::optional<SamplingBox> sampling;
};

/// Samples n poses; features are the flattened joint coordinates plus
/// isotropic Gaussian noise, with each joint independently replaced by
/// kOccludedSentinel with probability `occlusion_prob`. Labels are exact.
std::vector<Sample> makeDataset(const Skeleton& skeleton, const DatasetConfig& config);
std::vector<Sample> makeDataset(
    const Skeleton& skeleton,
    int n,
    double noise_sigma_mm,
    double occlusion_prob,
    std::uint64_t seed);

/// Feature width produced by makeDataset for this skeleton/config.
int featureWidth(const Skeleton& skeleton, const DatasetConfig& config);

struct DatasetFile {
  std::string skeleton_name;
  DatasetConfig config;
  std::vector<Sample> samples;
};

/// Text format: one header line, then `features;theta;joints` per sample with
/// comma-separated values.
void writeDataset(const std::filesystem::path& path, const Skeleton& skeleton, const DatasetFile& dataset);
DatasetFile readDataset(const std::filesystem::path& path, const Skeleton& skeleton);

}  // namespace kinedeep

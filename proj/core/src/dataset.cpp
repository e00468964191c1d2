#include "kinedeep/dataset.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "kinedeep/error.h"
#include "kinedeep/kinematics.h"
#include "kinedeep/pose_io.h"

namespace kinedeep {

namespace {

constexpr std::string_view kDatasetTag = "# kinedeep-dataset";

std::vector<int> featureJoints(const Skeleton& skeleton, const DatasetConfig& config) {
  if (config.eval_joints_only) {
    return skeleton.evalSubset();
  }
  std::vector<int> all(static_cast<std::size_t>(skeleton.jointCount()));
  for (int j = 0; j < skeleton.jointCount(); ++j) {
    all[static_cast<std::size_t>(j)] = j;
  }
  return all;
}

void validateConfig(const Skeleton& skeleton, const DatasetConfig& config) {
  if (config.n < 1) {
    throwValidation("dataset size must be at least 1");
  }
  if (!(config.noise_sigma_mm >= 0.0) || !std::isfinite(config.noise_sigma_mm)) {
    throwValidation("noise sigma must be a finite non-negative number");
  }
  if (!(config.occlusion_prob >= 0.0 && config.occlusion_prob < 1.0)) {
    throwValidation("occlusion probability must lie in [0, 1)");
  }
  if (config.sampling &&
      (config.sampling->lower.size() != skeleton.dofCount() || config.sampling->upper.size() != skeleton.dofCount())) {
    throwValidation("sampling box does not match the skeleton's DOF count");
  }
}

}  // namespace

SamplingBox viewLimitedBox(const Skeleton& skeleton, double half_range_deg) {
  if (!(half_range_deg >= 0.0)) {
    throwValidation("view range must be non-negative");
  }
  SamplingBox box{skeleton.lowerBounds(), skeleton.upperBounds()};
  const double half = half_range_deg * std::numbers::pi / 180.0;
  const int root = 0;
  const int first = skeleton.firstDof(root);
  for (int d = first; d < first + static_cast<int>(skeleton.joint(root).dofs.size()); ++d) {
    if (skeleton.dof(d).kind == DofKind::Rotation) {
      box.lower[d] = std::max(box.lower[d], -half);
      box.upper[d] = std::min(box.upper[d], half);
    }
  }
  return box;
}

PoseParams samplePose(const Skeleton& skeleton, std::mt19937_64& rng, const SamplingBox* box) {
  PoseParams theta(skeleton.dofCount());
  for (int d = 0; d < skeleton.dofCount(); ++d) {
    double lo = skeleton.dof(d).lower;
    double hi = skeleton.dof(d).upper;
    if (box != nullptr) {
      lo = std::max(lo, box->lower[d]);
      hi = std::min(hi, box->upper[d]);
      if (lo > hi) {
        throwValidation("sampling box does not intersect the bounds of dof " + std::to_string(d));
      }
    }
    std::uniform_real_distribution<double> uniform(lo, hi);
    theta[d] = uniform(rng);
  }
  return theta;
}

PoseParams samplePose(const Skeleton& skeleton, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return samplePose(skeleton, rng);
}

int featureWidth(const Skeleton& skeleton, const DatasetConfig& config) {
  return 3 * static_cast<int>(featureJoints(skeleton, config).size());
}

std::vector<Sample> makeDataset(const Skeleton& skeleton, const DatasetConfig& config) {
  validateConfig(skeleton, config);
  const std::vector<int> joints = featureJoints(skeleton, config);
  const SamplingBox* box = config.sampling ? &*config.sampling : nullptr;

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> noise(0.0, config.noise_sigma_mm > 0.0 ? config.noise_sigma_mm : 1.0);
  std::bernoulli_distribution occluded(config.occlusion_prob);
  KinematicsWorkspace kinematics(skeleton);

  std::vector<Sample> samples(static_cast<std::size_t>(config.n));
  for (Sample& sample : samples) {
    sample.gt_theta = samplePose(skeleton, rng, box);
    kinematics.forward(sample.gt_theta, sample.gt_joints);
    sample.features.resize(3 * static_cast<Eigen::Index>(joints.size()));
    for (std::size_t k = 0; k < joints.size(); ++k) {
      const bool hidden = occluded(rng);
      for (int c = 0; c < 3; ++c) {
        const double jitter = config.noise_sigma_mm > 0.0 ? noise(rng) : 0.0;
        sample.features[static_cast<Eigen::Index>(3 * k) + c] =
            hidden ? kOccludedSentinel : sample.gt_joints(joints[k], c) + jitter;
      }
    }
  }
  return samples;
}

std::vector<Sample> makeDataset(
    const Skeleton& skeleton,
    int n,
    double noise_sigma_mm,
    double occlusion_prob,
    std::uint64_t seed) {
  DatasetConfig config;
  config.n = n;
  config.noise_sigma_mm = noise_sigma_mm;
  config.occlusion_prob = occlusion_prob;
  config.seed = seed;
  return makeDataset(skeleton, config);
}

void writeDataset(const std::filesystem::path& path, const Skeleton& skeleton, const DatasetFile& dataset) {
  std::ofstream out(path);
  if (!out) {
    throwValidation("cannot write dataset '" + path.string() + "'");
  }
  const DatasetConfig& config = dataset.config;
  out << kDatasetTag << " skeleton=" << skeleton.name() << " sigma=" << formatValues({&config.noise_sigma_mm, 1})
      << " occlusion=" << formatValues({&config.occlusion_prob, 1}) << " seed=" << config.seed
      << " n=" << dataset.samples.size() << " features=" << (config.eval_joints_only ? "eval" : "all") << '\n';
  for (const Sample& sample : dataset.samples) {
    out << formatValues({sample.features.data(), static_cast<std::size_t>(sample.features.size())}) << ';'
        << formatValues({sample.gt_theta.data(), static_cast<std::size_t>(sample.gt_theta.size())}) << ';'
        << formatValues({sample.gt_joints.data(), static_cast<std::size_t>(sample.gt_joints.size())}) << '\n';
  }
}

DatasetFile readDataset(const std::filesystem::path& path, const Skeleton& skeleton) {
  std::ifstream in(path);
  if (!in) {
    throwValidation("cannot read dataset '" + path.string() + "'");
  }
  DatasetFile dataset;
  std::string line;
  if (!std::getline(in, line) || line.rfind(kDatasetTag, 0) != 0) {
    throwValidation(path.string() + ": line 1: missing dataset header");
  }
  std::map<std::string, std::string> fields;
  std::istringstream header(line.substr(kDatasetTag.size()));
  for (std::string token; header >> token;) {
    const auto eq = token.find('=');
    if (eq != std::string::npos) {
      fields[token.substr(0, eq)] = token.substr(eq + 1);
    }
  }
  const auto number = [&](const std::string& key) {
    const auto it = fields.find(key);
    if (it == fields.end()) {
      throwValidation(path.string() + ": line 1: header lacks '" + key + "'");
    }
    return parseValues(it->second, 1).front();
  };
  dataset.skeleton_name = fields.count("skeleton") ? fields["skeleton"] : std::string{};
  dataset.config.noise_sigma_mm = number("sigma");
  dataset.config.occlusion_prob = number("occlusion");
  dataset.config.eval_joints_only = fields["features"] == "eval";
  {
    const std::string& seedText = fields["seed"];
    std::uint64_t seed = 0;
    const auto result = std::from_chars(seedText.data(), seedText.data() + seedText.size(), seed);
    if (seedText.empty() || result.ec != std::errc{}) {
      throwValidation(path.string() + ": line 1: bad seed");
    }
    dataset.config.seed = seed;
  }

  const int dofs = skeleton.dofCount();
  const int joints = skeleton.jointCount();
  int lineNumber = 1;
  Eigen::Index width = -1;
  while (std::getline(in, line)) {
    ++lineNumber;
    if (line.empty()) {
      continue;
    }
    const auto first = line.find(';');
    const auto second = first == std::string::npos ? first : line.find(';', first + 1);
    if (second == std::string::npos) {
      throwValidation(path.string() + ": line " + std::to_string(lineNumber) + ": expected features;theta;joints");
    }
    const std::vector<double> features = parseValues(std::string_view(line).substr(0, first), lineNumber);
    const std::vector<double> theta =
        parseValues(std::string_view(line).substr(first + 1, second - first - 1), lineNumber);
    const std::vector<double> jointValues = parseValues(std::string_view(line).substr(second + 1), lineNumber);
    if (static_cast<int>(theta.size()) != dofs || static_cast<int>(jointValues.size()) != 3 * joints) {
      throwValidation(
          path.string() + ": line " + std::to_string(lineNumber) + ": pose/joint widths do not match skeleton '" +
          skeleton.name() + "'");
    }
    if (width < 0) {
      width = static_cast<Eigen::Index>(features.size());
    } else if (width != static_cast<Eigen::Index>(features.size())) {
      throwValidation(path.string() + ": line " + std::to_string(lineNumber) + ": inconsistent feature width");
    }
    Sample sample;
    sample.features = Eigen::Map<const Eigen::VectorXd>(features.data(), width);
    sample.gt_theta = Eigen::Map<const PoseParams>(theta.data(), dofs);
    sample.gt_joints = Eigen::Map<const JointSet>(jointValues.data(), joints, 3);
    dataset.samples.push_back(std::move(sample));
  }
  dataset.config.n = static_cast<int>(dataset.samples.size());
  return dataset;
}

}  // namespace kinedeep

#include <algorithm>
#include <cstdio>
#include <functional>
#include <random>

#include "cli.h"
#include "kinedeep/dataset.h"
#include "kinedeep/error.h"
#include "kinedeep/kinematics.h"
#include "kinedeep/loss.h"

namespace kinedeep::cli {
namespace {

constexpr double kStep = 1e-6;

double relativeError(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric, double floor) {
  const double scale = std::max(numeric.cwiseAbs().maxCoeff(), floor);
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

Eigen::VectorXd numericGradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x) {
  Eigen::VectorXd grad(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    probe[d] = x[d] + kStep;
    const double plus = f(probe);
    probe[d] = x[d] - kStep;
    const double minus = f(probe);
    probe[d] = x[d];
    grad[d] = (plus - minus) / (2.0 * kStep);
  }
  return grad;
}

Eigen::VectorXd stacked(const JointSet& joints) {
  return Eigen::Map<const Eigen::VectorXd>(joints.data(), joints.size());
}

double checkJacobian(const Skeleton& skeleton, const PoseParams& theta) {
  const FkResult fk = fkJacobian(skeleton, theta);
  Eigen::MatrixXd numeric(fk.jacobian.rows(), fk.jacobian.cols());
  PoseParams probe = theta;
  for (int d = 0; d < skeleton.dofCount(); ++d) {
    probe[d] = theta[d] + kStep;
    const Eigen::VectorXd plus = stacked(forwardKinematics(skeleton, probe));
    probe[d] = theta[d] - kStep;
    const Eigen::VectorXd minus = stacked(forwardKinematics(skeleton, probe));
    probe[d] = theta[d];
    numeric.col(d) = (plus - minus) / (2.0 * kStep);
  }
  return relativeError(fk.jacobian, numeric, 1.0);
}

double checkJointLoss(const Skeleton& skeleton, const PoseParams& theta, const JointSet& target) {
  const LossValue loss = jointLoss(skeleton, theta, target);
  const Eigen::VectorXd numeric =
      numericGradient([&](const Eigen::VectorXd& x) { return jointLoss(skeleton, x, target).value; }, theta);
  return relativeError(loss.grad, numeric, 1.0);
}

// Some rotations pushed outside their bounds, far enough that the step never
// crosses the hinge.
PoseParams partlyOutOfBounds(const Skeleton& skeleton, std::mt19937_64& rng) {
  PoseParams theta = samplePose(skeleton, rng);
  std::bernoulli_distribution pick(0.3);
  std::bernoulli_distribution above(0.5);
  std::uniform_real_distribution<double> overshoot(0.01, 0.5);
  for (int d = 0; d < skeleton.dofCount(); ++d) {
    const DofSpec& dof = skeleton.dof(d);
    if (dof.kind != DofKind::Rotation || !pick(rng)) {
      continue;
    }
    theta[d] = above(rng) ? dof.upper + overshoot(rng) : dof.lower - overshoot(rng);
  }
  return theta;
}

double checkPhyLoss(const Skeleton& skeleton, const PoseParams& theta) {
  const LossValue loss = phyLoss(skeleton, theta);
  const Eigen::VectorXd numeric =
      numericGradient([&](const Eigen::VectorXd& x) { return phyLoss(skeleton, x).value; }, theta);
  return relativeError(loss.grad, numeric, 1.0);
}

std::vector<double> flatParameters(const TrainRun& run) {
  std::vector<double> values;
  for (const DenseLayer& layer : run.layers) {
    values.insert(values.end(), layer.weights.data(), layer.weights.data() + layer.weights.size());
    values.insert(values.end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
  }
  return values;
}

std::vector<double*> parameterSlots(TrainRun& run) {
  std::vector<double*> slots;
  for (DenseLayer& layer : run.layers) {
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) {
      slots.push_back(layer.weights.data() + i);
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
      slots.push_back(layer.bias.data() + i);
    }
  }
  return slots;
}

std::vector<double> flatGradients(const Gradients& g) {
  std::vector<double> values;
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    values.insert(values.end(), g.weights[l].data(), g.weights[l].data() + g.weights[l].size());
    values.insert(values.end(), g.biases[l].data(), g.biases[l].data() + g.biases[l].size());
  }
  return values;
}

// Small net, random biases so no output sits exactly on a bound.
double checkEndToEnd(const Skeleton& skeleton, std::uint64_t seed) {
  DatasetConfig data;
  data.n = 2;
  data.noise_sigma_mm = 5.0;
  data.seed = seed;
  const std::vector<Sample> samples = makeDataset(skeleton, data);
  const Eigen::MatrixXd features = stackFeatures(samples);
  std::vector<JointSet> targets;
  for (const Sample& s : samples) {
    targets.push_back(s.gt_joints);
  }

  TrainRun run = initRun({{featureWidth(skeleton, data), 16, skeleton.dofCount()}, seed}, TrainMode::Ours);
  setLengthScale(run, skeleton, 150.0);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> uniform(-0.3, 0.3);
  for (DenseLayer& layer : run.layers) {
    for (Eigen::Index c = 0; c < layer.bias.size(); ++c) {
      layer.bias[c] = uniform(rng);
    }
  }

  const BatchLoss analytic = backwardThroughModel(run, features, targets, skeleton, kDefaultLambda);
  const std::vector<double> grad = flatGradients(analytic.gradients);
  const std::vector<double> start = flatParameters(run);
  std::vector<double*> slots = parameterSlots(run);
  Eigen::VectorXd a(static_cast<Eigen::Index>(grad.size()));
  Eigen::VectorXd numeric(a.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    *slots[i] = start[i] + kStep;
    const double plus = backwardThroughModel(run, features, targets, skeleton, kDefaultLambda).loss;
    *slots[i] = start[i] - kStep;
    const double minus = backwardThroughModel(run, features, targets, skeleton, kDefaultLambda).loss;
    *slots[i] = start[i];
    numeric[static_cast<Eigen::Index>(i)] = (plus - minus) / (2.0 * kStep);
    a[static_cast<Eigen::Index>(i)] = grad[i];
  }
  return relativeError(a, numeric, 1e-3);
}

}  // namespace

bool GradcheckReport::passed() const {
  return std::all_of(suites.begin(), suites.end(), [](const GradcheckSuite& s) { return s.passed(); });
}

GradcheckReport runGradcheck(const Skeleton& skeleton, int trials, std::uint64_t seed) {
  if (trials < 1) {
    throwValidation("gradcheck: trials must be >= 1");
  }
  GradcheckSuite jacobian{"fk_jacobian", 0.0, kKinematicsTolerance, trials};
  GradcheckSuite joint{"joint_loss", 0.0, kKinematicsTolerance, trials};
  GradcheckSuite phy{"phy_loss", 0.0, kKinematicsTolerance, trials};
  GradcheckSuite end{"end_to_end", 0.0, kEndToEndTolerance, trials};

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 10.0);
  for (int t = 0; t < trials; ++t) {
    const PoseParams theta = samplePose(skeleton, rng);
    jacobian.max_relative_error = std::max(jacobian.max_relative_error, checkJacobian(skeleton, theta));

    JointSet target = forwardKinematics(skeleton, samplePose(skeleton, rng));
    for (Eigen::Index i = 0; i < target.size(); ++i) {
      target.data()[i] += noise(rng);
    }
    joint.max_relative_error = std::max(joint.max_relative_error, checkJointLoss(skeleton, theta, target));

    phy.max_relative_error =
        std::max(phy.max_relative_error, checkPhyLoss(skeleton, partlyOutOfBounds(skeleton, rng)));

    end.max_relative_error = std::max(end.max_relative_error, checkEndToEnd(skeleton, rng()));
  }
  return {{jacobian, joint, phy, end}};
}

std::string gradcheckToText(const GradcheckReport& report) {
  std::string out = "suite          trials  max rel error  tolerance  result\n";
  for (const GradcheckSuite& s : report.suites) {
    char line[128];
    std::snprintf(line, sizeof(line), "%-14s %6d  %13.3e  %9.0e  %s\n", s.name.c_str(), s.trials,
                  s.max_relative_error, s.tolerance, s.passed() ? "PASS" : "FAIL");
    out += line;
  }
  return out;
}

nlohmann::ordered_json gradcheckToJson(const GradcheckReport& report) {
  nlohmann::ordered_json doc;
  doc["passed"] = report.passed();
  nlohmann::ordered_json suites = nlohmann::ordered_json::array();
  for (const GradcheckSuite& s : report.suites) {
    suites.push_back({{"name", s.name},
                      {"trials", s.trials},
                      {"max_relative_error", s.max_relative_error},
                      {"tolerance", s.tolerance},
                      {"passed", s.passed()}});
  }
  doc["suites"] = std::move(suites);
  return doc;
}

}  // namespace kinedeep::cli

// One PASS/FAIL line per acceptance criterion. Optional arguments select
// criteria by id (e.g. `kinedeep_acceptance AC1 AC6`); default runs all.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cli.h"
#include "kinedeep/dataset.h"
#include "kinedeep/ik_pso.h"
#include "kinedeep/kinematics.h"
#include "kinedeep/loss.h"
#include "kinedeep/regressor.h"
#include "support/fd_oracle.h"
#include "support/grid_oracle.h"
#include "support/test_skeletons.h"

namespace {

using namespace kinedeep;

struct Verdict {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* format, double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), format, value);
  return buffer;
}

double seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---- AC1

Eigen::VectorXd parameters(const TrainRun& run) {
  std::vector<double> values;
  for (const DenseLayer& layer : run.layers) {
    values.insert(values.end(), layer.weights.data(), layer.weights.data() + layer.weights.size());
    values.insert(values.end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
  }
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

void setParameters(TrainRun& run, const Eigen::VectorXd& values) {
  Eigen::Index offset = 0;
  for (DenseLayer& layer : run.layers) {
    std::copy(values.data() + offset, values.data() + offset + layer.weights.size(), layer.weights.data());
    offset += layer.weights.size();
    std::copy(values.data() + offset, values.data() + offset + layer.bias.size(), layer.bias.data());
    offset += layer.bias.size();
  }
}

Eigen::VectorXd gradientVector(const Gradients& g) {
  std::vector<double> values;
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    values.insert(values.end(), g.weights[l].data(), g.weights[l].data() + g.weights[l].size());
    values.insert(values.end(), g.biases[l].data(), g.biases[l].data() + g.biases[l].size());
  }
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Verdict gradientCorrectness() {
  const auto start = std::chrono::steady_clock::now();
  const Skeleton& hand = defaultHand();
  const int trials = 100;
  const double step = 1e-6;
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> noise(0.0, 10.0);
  std::bernoulli_distribution pick(0.3);
  std::uniform_real_distribution<double> overshoot(0.01, 0.5);

  double jac = 0.0;
  double joint = 0.0;
  double phy = 0.0;
  double net = 0.0;
  for (int t = 0; t < trials; ++t) {
    const PoseParams theta = samplePose(hand, rng);
    const Eigen::MatrixXd numeric = testing::centralJacobian(
        [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
          const JointSet j = forwardKinematics(hand, x);
          return Eigen::Map<const Eigen::VectorXd>(j.data(), j.size());
        },
        theta, step);
    jac = std::max(jac, testing::maxRelativeError(fkJacobian(hand, theta).jacobian, numeric));

    JointSet target = forwardKinematics(hand, samplePose(hand, rng));
    for (Eigen::Index i = 0; i < target.size(); ++i) {
      target.data()[i] += noise(rng);
    }
    const Eigen::VectorXd joint_fd = testing::centralGradient(
        [&](const Eigen::VectorXd& x) { return jointLoss(hand, x, target).value; }, theta, step);
    joint = std::max(joint, testing::maxRelativeError(jointLoss(hand, theta, target).grad, joint_fd));

    // Rotations pushed well outside their bounds so the step stays off the hinge.
    PoseParams outside = samplePose(hand, rng);
    for (int d = 0; d < hand.dofCount(); ++d) {
      if (hand.dof(d).kind == DofKind::Rotation && pick(rng)) {
        outside[d] = (t + d) % 2 == 0 ? hand.dof(d).upper + overshoot(rng) : hand.dof(d).lower - overshoot(rng);
      }
    }
    const Eigen::VectorXd phy_fd = testing::centralGradient(
        [&](const Eigen::VectorXd& x) { return phyLoss(hand, x).value; }, outside, step);
    phy = std::max(phy, testing::maxRelativeError(phyLoss(hand, outside).grad, phy_fd));

    const std::vector<Sample> batch = makeDataset(hand, 2, 5.0, 0.0, 500 + static_cast<std::uint64_t>(t));
    const Eigen::MatrixXd features = stackFeatures(batch);
    std::vector<JointSet> targets = {batch[0].gt_joints, batch[1].gt_joints};
    TrainRun run = initRun({{static_cast<int>(features.cols()), 16, hand.dofCount()}, static_cast<std::uint64_t>(t)},
                           TrainMode::Ours);
    setLengthScale(run, hand, 150.0);
    std::uniform_real_distribution<double> bias(-0.3, 0.3);
    for (DenseLayer& layer : run.layers) {
      for (Eigen::Index c = 0; c < layer.bias.size(); ++c) {
        layer.bias[c] = bias(rng);
      }
    }
    const Eigen::VectorXd analytic =
        gradientVector(backwardThroughModel(run, features, targets, hand, kDefaultLambda).gradients);
    const Eigen::VectorXd net_fd = testing::centralGradient(
        [&](const Eigen::VectorXd& w) {
          TrainRun probe = run;
          setParameters(probe, w);
          return backwardThroughModel(probe, features, targets, hand, kDefaultLambda).loss;
        },
        parameters(run), step);
    net = std::max(net, testing::maxRelativeError(analytic, net_fd, 1e-3));
  }
  const double elapsed = seconds(start);
  const bool ok = jac < 1e-6 && joint < 1e-6 && phy < 1e-6 && net < 1e-5 && elapsed < 30.0;
  return {ok, std::to_string(trials) + " poses: jacobian " + fmt("%.2e", jac) + ", joint loss " + fmt("%.2e", joint) +
                  ", phy loss " + fmt("%.2e", phy) + " (< 1e-6); end-to-end " + fmt("%.2e", net) +
                  " (< 1e-5); " + fmt("%.1f", elapsed) + " s (< 30 s)"};
}

// ---- AC2 / AC3

double worstBoneError(const Skeleton& skeleton, const PoseParams& theta) {
  const JointSet joints = forwardKinematics(skeleton, theta);
  double worst = 0.0;
  for (int u = 0; u < skeleton.jointCount(); ++u) {
    const int p = skeleton.joint(u).parent;
    if (p < 0) {
      continue;
    }
    const double length = (joints.row(u) - joints.row(p)).norm();
    worst = std::max(worst, std::abs(length - skeleton.joint(u).bone_length));
  }
  return worst;
}

std::vector<PoseParams> g_pso_results;

Verdict psoFitting() {
  const Skeleton& hand = defaultHand();
  PsoConfig config;
  double total = 0.0;
  int bad = 0;
  g_pso_results.clear();
  for (int i = 0; i < 100; ++i) {
    config.seed = static_cast<std::uint64_t>(i);
    const JointSet target = forwardKinematics(hand, samplePose(hand, 10000 + static_cast<std::uint64_t>(i)));
    const FitResult fit = fitPose(hand, target, config);
    total += fit.residual_mm;
    bad += fit.residual_mm > 1.0 ? 1 : 0;
    g_pso_results.push_back(fit.theta);
  }
  const double mean = total / 100.0;

  const Skeleton chain = testing::planarChain({40.0, 30.0, 20.0}, -120.0, 120.0);
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> offset(-15.0, 15.0);
  double worst_gap = 0.0;
  for (int trial = 0; trial < 6; ++trial) {
    JointSet target = forwardKinematics(chain, samplePose(chain, rng));
    if (trial % 2 == 1) {
      target.row(3) += Eigen::RowVector3d(offset(rng), offset(rng), 0.0);
    }
    PsoConfig chain_config;
    chain_config.seed = static_cast<std::uint64_t>(trial);
    const FitResult fit = fitPose(chain, target, chain_config);
    const testing::GridOptimum grid = testing::gridSearch(chain, target);
    worst_gap = std::max({worst_gap, std::abs(fit.theta[0] - grid.a), std::abs(fit.theta[1] - grid.b)});
    g_pso_results.push_back(fit.theta);
  }
  const double gap_deg = worst_gap * 180.0 / std::numbers::pi;
  return {mean < 1.0 && gap_deg < 0.5, "hand mean residual " + fmt("%.4f", mean) + " mm over 100 frames (< 1.0; " +
                                           std::to_string(bad) + " frames above 1 mm); planar chain vs grid " +
                                           fmt("%.3f", gap_deg) + " deg (< 0.5)"};
}

Verdict geometricValidity() {
  const Skeleton& hand = defaultHand();
  if (g_pso_results.empty()) {
    psoFitting();
  }
  DatasetConfig data;
  data.n = 400;
  data.noise_sigma_mm = 10.0;
  data.occlusion_prob = 0.1;
  data.seed = 31;
  data.sampling = viewLimitedBox(hand, 30.0);
  const std::vector<Sample> train_set = makeDataset(hand, data);
  data.seed = 32;
  const std::vector<Sample> val = makeDataset(hand, data);

  double worst = 0.0;
  int poses = 0;
  SgdConfig sgd;
  sgd.epochs = 3;
  sgd.patience = 0;
  for (const TrainMode mode : {TrainMode::Ours, TrainMode::OursNoPhy, TrainMode::DirectParameter}) {
    TrainRun run = initRun({{static_cast<int>(train_set.front().features.size()), 64, 64, hand.dofCount()}, 5}, mode);
    setLengthScale(run, hand, 150.0);
    train(run, train_set, {}, hand, sgd);
    for (const PoseParams& theta : predictPoses(run, val)) {
      worst = std::max(worst, worstBoneError(hand, theta));
      ++poses;
    }
  }
  const int hand_fits = 100;
  for (int i = 0; i < hand_fits; ++i) {
    worst = std::max(worst, worstBoneError(hand, g_pso_results[static_cast<std::size_t>(i)]));
  }
  const Skeleton chain = testing::planarChain({40.0, 30.0, 20.0}, -120.0, 120.0);
  for (std::size_t i = hand_fits; i < g_pso_results.size(); ++i) {
    worst = std::max(worst, worstBoneError(chain, g_pso_results[i]));
  }
  return {worst <= 1e-9, std::to_string(poses) + " predicted poses + " + std::to_string(g_pso_results.size()) +
                             " PSO results: worst bone length deviation " + fmt("%.2e", worst) + " mm (<= 1e-9)"};
}

// ---- AC4 / AC7

Verdict g_determinism{false, "not run"};

Verdict tableOrdering() {
  const cli::ReproduceConfig config;
  const auto start = std::chrono::steady_clock::now();
  const cli::ReproduceReport first = cli::runReproduce(config, &std::cerr);
  const double elapsed = seconds(start);
  std::cout << cli::reproduceTable(first);

  const cli::ReproduceReport second = cli::runReproduce(config);
  const bool same_table = cli::reproduceTable(first) == cli::reproduceTable(second);
  const bool same_json = cli::reproduceToJson(first).dump() == cli::reproduceToJson(second).dump();
  g_determinism = {same_table && same_json, std::string("two reproduce runs, seed ") + std::to_string(config.seed) +
                                                ": tables " + (same_table ? "identical" : "differ") + ", reports " +
                                                (same_json ? "identical" : "differ")};

  std::string detail;
  for (const cli::OrderingCheck& c : first.checks) {
    detail += std::string(c.passed ? "ok " : "FAILED ") + c.name + " (" + c.detail + "); ";
  }
  detail += fmt("%.0f", elapsed) + " s (< 1800 s)";
  return {first.passed() && elapsed < 1800.0, detail};
}

Verdict determinism() {
  if (g_determinism.detail == "not run") {
    tableOrdering();
  }
  return g_determinism;
}

// ---- AC5

Verdict singleSampleOverfit() {
  const Skeleton& hand = defaultHand();
  std::vector<Sample> one = makeDataset(hand, 1, 0.0, 0.0, 0);
  one[0].features = Eigen::VectorXd(one[0].features.head(6));
  TrainRun run = initRun({{6, 8, hand.dofCount()}, 0}, TrainMode::OursNoPhy);
  setLengthScale(run, hand, 150.0);
  SgdConfig sgd;
  sgd.epochs = 2000;
  sgd.batch_size = 1;
  sgd.learning_rate = 0.1;
  sgd.momentum = 0.9;
  sgd.lambda = 0.0;
  sgd.patience = 0;
  train(run, one, one, hand, sgd);
  double best = run.history.front().val_joint_error_mm;
  int best_epoch = run.history.front().epoch;
  for (const EpochRecord& r : run.history) {
    if (r.val_joint_error_mm < best) {
      best = r.val_joint_error_mm;
      best_epoch = r.epoch;
    }
  }
  return {best < 1.0, "ours_no_phy, net [6, 8, 26], lr 0.1, batch 1: best " + fmt("%.3f", best) + " mm at epoch " +
                          std::to_string(best_epoch) + ", final " +
                          fmt("%.3f", run.history.back().val_joint_error_mm) + " mm after " +
                          std::to_string(run.history.size()) + " epochs (< 1 mm)"};
}

// ---- AC6

Verdict performance() {
  const Skeleton& hand = defaultHand();
  KinematicsWorkspace workspace(hand);
  std::mt19937_64 rng(6);
  std::vector<PoseParams> poses;
  for (int i = 0; i < 1000; ++i) {
    poses.push_back(samplePose(hand, rng));
  }
  JointSet joints;
  KinematicsJacobian jacobian;
  double best = 1e9;
  double sink = 0.0;
  for (int rep = 0; rep < 7; ++rep) {
    const auto start = std::chrono::steady_clock::now();
    for (int k = 0; k < 10; ++k) {
      for (const PoseParams& theta : poses) {
        workspace.forwardWithJacobian(theta, joints, jacobian);
        sink += jacobian(0, 0);
      }
    }
    best = std::min(best, seconds(start) / 10000.0);
  }
  const double us = best * 1e6;
  return {us < 50.0 && std::isfinite(sink),
          "FK + 69x26 Jacobian " + fmt("%.2f", us) + " us/pose (best of 7 x 10000; < 50 us)"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::pair<std::string, std::function<Verdict()>>>> criteria = {
      {"AC1", {"gradient correctness", gradientCorrectness}},
      {"AC2", {"geometric validity", geometricValidity}},
      {"AC3", {"PSO fitting", psoFitting}},
      {"AC4", {"four-mode ordering on synthetic data", tableOrdering}},
      {"AC5", {"single-sample overfit", singleSampleOverfit}},
      {"AC6", {"FK + Jacobian performance", performance}},
      {"AC7", {"reproduce determinism", determinism}},
  };
  std::set<std::string> selected(argv + 1, argv + argc);

  int failures = 0;
  for (const auto& [id, entry] : criteria) {
    if (!selected.empty() && selected.count(id) == 0) {
      continue;
    }
    Verdict verdict;
    try {
      verdict = entry.second();
    } catch (const std::exception& e) {
      verdict = {false, std::string("exception: ") + e.what()};
    }
    failures += verdict.passed ? 0 : 1;
    std::cout << (verdict.passed ? "PASS " : "FAIL ") << id << " " << entry.first << ": " << verdict.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}

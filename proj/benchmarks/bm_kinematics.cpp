#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "kinedeep/dataset.h"
#include "kinedeep/ik_pso.h"
#include "kinedeep/kinematics.h"
#include "kinedeep/regressor.h"

namespace {

using namespace kinedeep;

std::vector<PoseParams> randomPoses(int n) {
  const Skeleton& hand = defaultHand();
  std::mt19937_64 rng(42);
  std::vector<PoseParams> poses;
  for (int i = 0; i < n; ++i) {
    poses.push_back(samplePose(hand, rng));
  }
  return poses;
}

void BM_Forward(benchmark::State& state) {
  KinematicsWorkspace workspace(defaultHand());
  const std::vector<PoseParams> poses = randomPoses(256);
  JointSet joints;
  std::size_t i = 0;
  for (auto _ : state) {
    workspace.forward(poses[i++ % poses.size()], joints);
    benchmark::DoNotOptimize(joints.data());
  }
}
BENCHMARK(BM_Forward);

// The hot-loop path: joints and full 69 x 26 Jacobian into reused buffers.
void BM_ForwardWithJacobian(benchmark::State& state) {
  KinematicsWorkspace workspace(defaultHand());
  const std::vector<PoseParams> poses = randomPoses(256);
  JointSet joints;
  KinematicsJacobian jacobian;
  std::size_t i = 0;
  for (auto _ : state) {
    workspace.forwardWithJacobian(poses[i++ % poses.size()], joints, jacobian);
    benchmark::DoNotOptimize(jacobian.data());
  }
}
BENCHMARK(BM_ForwardWithJacobian);

// Free function, allocating the result each call.
void BM_FkJacobian(benchmark::State& state) {
  const Skeleton& hand = defaultHand();
  const std::vector<PoseParams> poses = randomPoses(256);
  std::size_t i = 0;
  for (auto _ : state) {
    FkResult fk = fkJacobian(hand, poses[i++ % poses.size()]);
    benchmark::DoNotOptimize(fk.jacobian.data());
  }
}
BENCHMARK(BM_FkJacobian);

void BM_FitPose(benchmark::State& state) {
  const Skeleton& hand = defaultHand();
  const JointSet target = forwardKinematics(hand, samplePose(hand, 7));
  PsoConfig config;
  config.iterations = static_cast<int>(state.range(0));
  for (auto _ : state) {
    FitResult fit = fitPose(hand, target, config);
    benchmark::DoNotOptimize(fit.residual_mm);
  }
}
BENCHMARK(BM_FitPose)->Arg(100)->Arg(300)->Unit(benchmark::kMillisecond);

void BM_TrainStepOurs(benchmark::State& state) {
  const Skeleton& hand = defaultHand();
  const std::vector<Sample> batch = makeDataset(hand, 64, 10.0, 0.1, 3);
  const Eigen::MatrixXd features = stackFeatures(batch);
  std::vector<JointSet> targets;
  for (const Sample& s : batch) {
    targets.push_back(s.gt_joints);
  }
  TrainRun run = initRun(defaultMlpConfig(hand, TrainMode::Ours, static_cast<int>(features.cols()), 1));
  setLengthScale(run, hand, 150.0);
  for (auto _ : state) {
    BatchLoss loss = backwardThroughModel(run, features, targets, hand, 1.0);
    benchmark::DoNotOptimize(loss.loss);
  }
}
BENCHMARK(BM_TrainStepOurs)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();

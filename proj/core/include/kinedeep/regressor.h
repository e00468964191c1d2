#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "kinedeep/dataset.h"
#include "kinedeep/skeleton.h"
#include "kinedeep/types.h"

namespace kinedeep {

/// How the regressor output is wired to the loss.
///  - Ours: output is theta, passed through F, joint loss + lambda * phy loss.
///  - OursNoPhy: same without the phy term.
///  - DirectJoint: output is the flattened eval joints, plain squared error.
///  - DirectParameter: output is theta, squared error against the true theta.
enum class TrainMode { Ours, OursNoPhy, DirectJoint, DirectParameter };

std::string_view toString(TrainMode mode);
TrainMode parseTrainMode(std::string_view text);
/// True for modes whose network output is a pose vector.
bool emitsPose(TrainMode mode);

/// Layer widths from input to output. Hidden layers use ReLU, the output layer
/// is linear.
struct MlpConfig {
  std::vector<int> layer_widths;
  std::uint64_t seed = 0;
};

/// Output width the mode requires for this skeleton.
int outputWidth(const Skeleton& skeleton, TrainMode mode);
/// [input, 256, 256, output].
MlpConfig defaultMlpConfig(const Skeleton& skeleton, TrainMode mode, int input_width, std::uint64_t seed);

struct SgdConfig {
  int batch_size = 64;
  double learning_rate = 0.003;
  double momentum = 0.9;
  int epochs = 200;
  double lambda = 1.0;
  /// Early stop when validation joint error improved by less than
  /// `min_relative_improvement` over the last `patience` epochs. 0 disables.
  int patience = 10;
  double min_relative_improvement = 1e-3;
};

/// Batch 512 with the same learning rate and momentum.
SgdConfig largeBatchSgdConfig();
void validateSgdConfig(const SgdConfig& config);

struct DenseLayer {
  Eigen::MatrixXd weights;  // fan_in x fan_out
  Eigen::RowVectorXd bias;
  Eigen::MatrixXd weight_velocity;
  Eigen::RowVectorXd bias_velocity;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_joint_error_mm = 0.0;
  double val_angle_error_deg = 0.0;
  double val_invalid_fraction = 0.0;
};

/// Regressor weights, optimizer state, mode and metric history.
///
/// Inputs are multiplied by 1/length_scale_mm before the first layer and
/// network outputs are multiplied by `output_scale` (length_scale_mm for
/// millimeter quantities, 1 for angles). The joint loss enters training
/// divided by length_scale_mm^2. A length scale of 1 keeps raw units.
struct TrainRun {
  MlpConfig config;
  TrainMode mode = TrainMode::Ours;
  double length_scale_mm = 1.0;
  Eigen::RowVectorXd output_scale;
  std::vector<DenseLayer> layers;
  SgdConfig sgd;
  std::vector<EpochRecord> history;
  bool stopped_early = false;

  int inputWidth() const;
  int outputWidth() const;
};

/// Seeded uniform weights in +-1/sqrt(fan_in), zero biases and velocities,
/// unit scaling.
TrainRun initRun(const MlpConfig& config, TrainMode mode = TrainMode::Ours);

/// Sets the length scale and derives the output scaling for `mode`.
void setLengthScale(TrainRun& run, const Skeleton& skeleton, double length_scale_mm);

/// One row per sample. Pose modes return theta; DirectJoint returns the
/// flattened eval joints in millimeters.
Eigen::MatrixXd forward(const TrainRun& run, const Eigen::MatrixXd& features);

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::RowVectorXd> biases;
};

struct BatchLoss {
  double loss = 0.0;
  Gradients gradients;
};

/// Mean over the batch of L_jt/length_scale^2 + lambda * L_phy evaluated on
/// F(network output), with gradients backpropagated through F and the network.
/// Requires mode Ours or OursNoPhy (the latter with lambda = 0).
BatchLoss backwardThroughModel(
    const TrainRun& run,
    const Eigen::MatrixXd& features,
    std::span<const JointSet> targets,
    const Skeleton& skeleton,
    double lambda);

/// Mean over the batch of 1/2 |(output - target) / output_scale|^2.
/// Targets are poses (DirectParameter) or flattened eval joints (DirectJoint),
/// one row per sample.
BatchLoss backwardDirect(const TrainRun& run, const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets);

/// velocity <- momentum * velocity - lr * grad; weights <- weights + velocity.
void sgdStep(TrainRun& run, const Gradients& gradients, const SgdConfig& config);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch SGD with seeded shuffling. Records one history entry per epoch;
/// validation metrics are computed when `validation` is nonempty (angle and
/// invalid-pose metrics are NaN for DirectJoint).
void train(
    TrainRun& run,
    std::span<const Sample> dataset,
    std::span<const Sample> validation,
    const Skeleton& skeleton,
    const SgdConfig& config,
    const EpochCallback& on_epoch = {});

Eigen::MatrixXd stackFeatures(std::span<const Sample> samples);
/// Flattened eval-joint rows of a joint set.
Eigen::RowVectorXd flattenEvalJoints(const Skeleton& skeleton, const JointSet& joints);

/// Pose predictions; requires a pose-emitting mode.
std::vector<PoseParams> predictPoses(const TrainRun& run, std::span<const Sample> samples);
/// Joint predictions for any mode. DirectJoint fills the eval rows only (the
/// remaining rows are zero); pose modes return F(theta).
std::vector<JointSet> predictJoints(const TrainRun& run, const Skeleton& skeleton, std::span<const Sample> samples);

}  // namespace kinedeep

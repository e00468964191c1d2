#include "kinedeep/regressor.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "kinedeep/error.h"
#include "kinedeep/kinematics.h"
#include "kinedeep/loss.h"
#include "kinedeep/metrics.h"

namespace kinedeep {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Activations {
  // inputs[l] feeds layer l; pre[l] is the affine output of layer l.
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<Eigen::MatrixXd> pre;
};

void checkFeatures(const TrainRun& run, const Eigen::MatrixXd& features) {
  if (features.cols() != run.inputWidth()) {
    throwValidation(
        "feature width " + std::to_string(features.cols()) + " does not match network input width " +
        std::to_string(run.inputWidth()));
  }
}

Activations runLayers(const TrainRun& run, const Eigen::MatrixXd& features) {
  checkFeatures(run, features);
  Activations acts;
  const std::size_t count = run.layers.size();
  acts.inputs.reserve(count);
  acts.pre.reserve(count);
  acts.inputs.push_back(features / run.length_scale_mm);
  for (std::size_t l = 0; l < count; ++l) {
    const DenseLayer& layer = run.layers[l];
    Eigen::MatrixXd z = acts.inputs[l] * layer.weights;
    z.rowwise() += layer.bias;
    if (l + 1 < count) {
      acts.inputs.push_back(z.cwiseMax(0.0));
    }
    acts.pre.push_back(std::move(z));
  }
  return acts;
}

// Scaled network output (theta or millimeter joints).
Eigen::MatrixXd scaledOutput(const TrainRun& run, const Activations& acts) {
  return acts.pre.back().array().rowwise() * run.output_scale.array();
}

// Backpropagates dL/d(raw output) through the layers.
Gradients backpropagate(const TrainRun& run, const Activations& acts, Eigen::MatrixXd upstream) {
  const std::size_t count = run.layers.size();
  Gradients grads;
  grads.weights.resize(count);
  grads.biases.resize(count);
  for (std::size_t l = count; l-- > 0;) {
    grads.weights[l].noalias() = acts.inputs[l].transpose() * upstream;
    grads.biases[l] = upstream.colwise().sum();
    if (l > 0) {
      Eigen::MatrixXd down = upstream * run.layers[l].weights.transpose();
      upstream = down.array() * (acts.pre[l - 1].array() > 0.0).cast<double>();
    }
  }
  return grads;
}

void checkFiniteLoss(double loss, const Gradients& grads) {
  bool finite = std::isfinite(loss);
  for (std::size_t l = 0; finite && l < grads.weights.size(); ++l) {
    finite = grads.weights[l].allFinite() && grads.biases[l].allFinite();
  }
  if (!finite) {
    throwNumerical("non-finite loss or gradient");
  }
}

bool shouldStop(const std::vector<EpochRecord>& history, const SgdConfig& config) {
  const auto patience = static_cast<std::size_t>(config.patience);
  if (config.patience <= 0 || history.size() <= patience) {
    return false;
  }
  const double reference = history[history.size() - patience - 1].val_joint_error_mm;
  double recent = std::numeric_limits<double>::infinity();
  for (std::size_t k = history.size() - patience; k < history.size(); ++k) {
    recent = std::min(recent, history[k].val_joint_error_mm);
  }
  return reference - recent < config.min_relative_improvement * reference;
}

}  // namespace

std::string_view toString(TrainMode mode) {
  switch (mode) {
    case TrainMode::Ours:
      return "ours";
    case TrainMode::OursNoPhy:
      return "ours_no_phy";
    case TrainMode::DirectJoint:
      return "direct_joint";
    case TrainMode::DirectParameter:
      return "direct_parameter";
  }
  return "?";
}

TrainMode parseTrainMode(std::string_view text) {
  for (TrainMode mode : {TrainMode::Ours, TrainMode::OursNoPhy, TrainMode::DirectJoint, TrainMode::DirectParameter}) {
    if (text == toString(mode)) {
      return mode;
    }
  }
  throwValidation("unknown training mode '" + std::string(text) + "'");
}

bool emitsPose(TrainMode mode) {
  return mode != TrainMode::DirectJoint;
}

int outputWidth(const Skeleton& skeleton, TrainMode mode) {
  return emitsPose(mode) ? skeleton.dofCount() : 3 * skeleton.evalCount();
}

MlpConfig defaultMlpConfig(const Skeleton& skeleton, TrainMode mode, int input_width, std::uint64_t seed) {
  return MlpConfig{{input_width, 256, 256, outputWidth(skeleton, mode)}, seed};
}

SgdConfig largeBatchSgdConfig() {
  SgdConfig config;
  config.batch_size = 512;
  return config;
}

void validateSgdConfig(const SgdConfig& config) {
  if (config.batch_size < 1) {
    throwValidation("batch size must be at least 1");
  }
  if (!(config.learning_rate > 0.0)) {
    throwValidation("learning rate must be positive");
  }
  if (!(config.momentum >= 0.0 && config.momentum < 1.0)) {
    throwValidation("momentum must lie in [0, 1)");
  }
  if (config.epochs < 0) {
    throwValidation("epochs must be non-negative");
  }
  if (!(config.lambda >= 0.0)) {
    throwValidation("lambda must be non-negative");
  }
}

int TrainRun::inputWidth() const {
  return config.layer_widths.front();
}

int TrainRun::outputWidth() const {
  return config.layer_widths.back();
}

TrainRun initRun(const MlpConfig& config, TrainMode mode) {
  if (config.layer_widths.size() < 2) {
    throwValidation("a network needs at least an input and an output width");
  }
  for (int width : config.layer_widths) {
    if (width < 1) {
      throwValidation("layer widths must be positive");
    }
  }
  TrainRun run;
  run.config = config;
  run.mode = mode;
  run.output_scale = Eigen::RowVectorXd::Ones(config.layer_widths.back());

  std::mt19937_64 rng(config.seed);
  for (std::size_t l = 0; l + 1 < config.layer_widths.size(); ++l) {
    const int fanIn = config.layer_widths[l];
    const int fanOut = config.layer_widths[l + 1];
    const double limit = 1.0 / std::sqrt(static_cast<double>(fanIn));
    std::uniform_real_distribution<double> uniform(-limit, limit);
    DenseLayer layer;
    layer.weights.resize(fanIn, fanOut);
    // Column-major fill keeps the draw order independent of Eigen internals.
    for (int c = 0; c < fanOut; ++c) {
      for (int r = 0; r < fanIn; ++r) {
        layer.weights(r, c) = uniform(rng);
      }
    }
    layer.bias = Eigen::RowVectorXd::Zero(fanOut);
    layer.weight_velocity = Eigen::MatrixXd::Zero(fanIn, fanOut);
    layer.bias_velocity = Eigen::RowVectorXd::Zero(fanOut);
    run.layers.push_back(std::move(layer));
  }
  return run;
}

void setLengthScale(TrainRun& run, const Skeleton& skeleton, double length_scale_mm) {
  if (!(length_scale_mm > 0.0) || !std::isfinite(length_scale_mm)) {
    throwValidation("length scale must be a positive number");
  }
  if (run.outputWidth() != outputWidth(skeleton, run.mode)) {
    throwValidation(
        "network output width " + std::to_string(run.outputWidth()) + " does not fit mode " +
        std::string(toString(run.mode)) + " (expected " + std::to_string(outputWidth(skeleton, run.mode)) + ")");
  }
  run.length_scale_mm = length_scale_mm;
  run.output_scale = Eigen::RowVectorXd::Ones(run.outputWidth());
  if (emitsPose(run.mode)) {
    for (int d = 0; d < skeleton.dofCount(); ++d) {
      if (skeleton.dof(d).kind == DofKind::Translation) {
        run.output_scale[d] = length_scale_mm;
      }
    }
  } else {
    run.output_scale.setConstant(length_scale_mm);
  }
}

Eigen::MatrixXd forward(const TrainRun& run, const Eigen::MatrixXd& features) {
  return scaledOutput(run, runLayers(run, features));
}

BatchLoss backwardThroughModel(
    const TrainRun& run,
    const Eigen::MatrixXd& features,
    std::span<const JointSet> targets,
    const Skeleton& skeleton,
    double lambda) {
  if (run.mode != TrainMode::Ours && run.mode != TrainMode::OursNoPhy) {
    throwValidation("backwardThroughModel requires mode ours or ours_no_phy");
  }
  if (run.mode == TrainMode::OursNoPhy && lambda != 0.0) {
    throwValidation("mode ours_no_phy requires lambda = 0");
  }
  if (!(lambda >= 0.0)) {
    throwValidation("lambda must be non-negative");
  }
  if (static_cast<std::size_t>(features.rows()) != targets.size()) {
    throwValidation("feature and target batch sizes differ");
  }
  if (run.outputWidth() != skeleton.dofCount()) {
    throwValidation("network output width does not match the skeleton's DOF count");
  }
  const Activations acts = runLayers(run, features);
  const Eigen::MatrixXd theta = scaledOutput(run, acts);
  const Eigen::Index batch = features.rows();
  const double jointWeight = 1.0 / (run.length_scale_mm * run.length_scale_mm);

  KinematicsWorkspace kinematics(skeleton);
  FkResult fk;
  Eigen::MatrixXd upstream(batch, theta.cols());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < batch; ++i) {
    const PoseParams pose = theta.row(i).transpose();
    kinematics.forwardWithJacobian(pose, fk.joints, fk.jacobian);
    const LossValue joint = jointLoss(skeleton, fk, targets[static_cast<std::size_t>(i)]);
    const LossValue phy = phyLoss(skeleton, pose);
    loss += jointWeight * joint.value + lambda * phy.value;
    upstream.row(i) = (jointWeight * joint.grad + lambda * phy.grad).transpose();
  }
  upstream.array().rowwise() *= run.output_scale.array();
  upstream /= static_cast<double>(batch);

  BatchLoss out;
  out.loss = loss / static_cast<double>(batch);
  out.gradients = backpropagate(run, acts, std::move(upstream));
  return out;
}

BatchLoss backwardDirect(const TrainRun& run, const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets) {
  if (run.mode != TrainMode::DirectJoint && run.mode != TrainMode::DirectParameter) {
    throwValidation("backwardDirect requires mode direct_joint or direct_parameter");
  }
  if (targets.rows() != features.rows() || targets.cols() != run.outputWidth()) {
    throwValidation(
        "targets must have one row per sample and " + std::to_string(run.outputWidth()) + " columns for mode " +
        std::string(toString(run.mode)));
  }
  const Activations acts = runLayers(run, features);
  const Eigen::MatrixXd output = scaledOutput(run, acts);
  const Eigen::MatrixXd normalized = (output - targets).array().rowwise() / run.output_scale.array();
  const auto batch = static_cast<double>(features.rows());

  BatchLoss out;
  out.loss = 0.5 * normalized.squaredNorm() / batch;
  // d/d(raw output) of 1/2 |(raw * scale - target) / scale|^2 is the normalized residual.
  out.gradients = backpropagate(run, acts, normalized / batch);
  return out;
}

void sgdStep(TrainRun& run, const Gradients& gradients, const SgdConfig& config) {
  if (gradients.weights.size() != run.layers.size() || gradients.biases.size() != run.layers.size()) {
    throwValidation("gradient layer count does not match the network");
  }
  for (std::size_t l = 0; l < run.layers.size(); ++l) {
    DenseLayer& layer = run.layers[l];
    if (gradients.weights[l].rows() != layer.weights.rows() || gradients.weights[l].cols() != layer.weights.cols() ||
        gradients.biases[l].size() != layer.bias.size()) {
      throwValidation("gradient shape mismatch at layer " + std::to_string(l));
    }
    layer.weight_velocity = config.momentum * layer.weight_velocity - config.learning_rate * gradients.weights[l];
    layer.bias_velocity = config.momentum * layer.bias_velocity - config.learning_rate * gradients.biases[l];
    layer.weights += layer.weight_velocity;
    layer.bias += layer.bias_velocity;
  }
}

Eigen::MatrixXd stackFeatures(std::span<const Sample> samples) {
  if (samples.empty()) {
    return {};
  }
  Eigen::MatrixXd features(static_cast<Eigen::Index>(samples.size()), samples.front().features.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].features.size() != features.cols()) {
      throwValidation("samples have inconsistent feature widths");
    }
    features.row(static_cast<Eigen::Index>(i)) = samples[i].features.transpose();
  }
  return features;
}

Eigen::RowVectorXd flattenEvalJoints(const Skeleton& skeleton, const JointSet& joints) {
  checkJointSetSize(skeleton, joints);
  Eigen::RowVectorXd flat(3 * skeleton.evalCount());
  int k = 0;
  for (int u : skeleton.evalSubset()) {
    flat.segment<3>(3 * k++) = joints.row(u);
  }
  return flat;
}

std::vector<PoseParams> predictPoses(const TrainRun& run, std::span<const Sample> samples) {
  if (!emitsPose(run.mode)) {
    throwValidation("mode " + std::string(toString(run.mode)) + " does not predict poses");
  }
  std::vector<PoseParams> poses;
  if (samples.empty()) {
    return poses;
  }
  const Eigen::MatrixXd theta = forward(run, stackFeatures(samples));
  poses.reserve(samples.size());
  for (Eigen::Index i = 0; i < theta.rows(); ++i) {
    poses.push_back(theta.row(i).transpose());
  }
  return poses;
}

std::vector<JointSet> predictJoints(const TrainRun& run, const Skeleton& skeleton, std::span<const Sample> samples) {
  std::vector<JointSet> frames;
  if (samples.empty()) {
    return frames;
  }
  if (emitsPose(run.mode)) {
    KinematicsWorkspace kinematics(skeleton);
    for (const PoseParams& pose : predictPoses(run, samples)) {
      JointSet joints;
      kinematics.forward(pose, joints);
      frames.push_back(std::move(joints));
    }
    return frames;
  }
  if (run.outputWidth() != 3 * skeleton.evalCount()) {
    throwValidation("network output width does not match the eval joint count");
  }
  const Eigen::MatrixXd output = forward(run, stackFeatures(samples));
  for (Eigen::Index i = 0; i < output.rows(); ++i) {
    JointSet joints = JointSet::Zero(skeleton.jointCount(), 3);
    int k = 0;
    for (int u : skeleton.evalSubset()) {
      joints.row(u) = output.row(i).segment<3>(3 * k++);
    }
    frames.push_back(std::move(joints));
  }
  return frames;
}

void train(
    TrainRun& run,
    std::span<const Sample> dataset,
    std::span<const Sample> validation,
    const Skeleton& skeleton,
    const SgdConfig& config,
    const EpochCallback& on_epoch) {
  validateSgdConfig(config);
  if (dataset.empty()) {
    throwValidation("training dataset is empty");
  }
  if (run.outputWidth() != outputWidth(skeleton, run.mode)) {
    throwValidation("network output width does not fit mode " + std::string(toString(run.mode)));
  }
  run.sgd = config;
  const double lambda = run.mode == TrainMode::Ours ? config.lambda : 0.0;
  const std::size_t batchSize = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), dataset.size());

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::seed_seq shuffleSeed{static_cast<std::uint32_t>(run.config.seed), static_cast<std::uint32_t>(run.config.seed >> 32),
                            static_cast<std::uint32_t>(run.history.size())};
  std::mt19937_64 rng(shuffleSeed);

  const std::vector<double> thresholds = defaultThresholds();
  const int firstEpoch = static_cast<int>(run.history.size()) + 1;
  for (int epoch = firstEpoch; epoch < firstEpoch + config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double lossSum = 0.0;
    int batchIndex = 0;
    for (std::size_t start = 0; start < order.size(); start += batchSize, ++batchIndex) {
      const std::size_t end = std::min(order.size(), start + batchSize);
      const auto rows = static_cast<Eigen::Index>(end - start);
      Eigen::MatrixXd features(rows, run.inputWidth());
      for (std::size_t i = start; i < end; ++i) {
        const Sample& sample = dataset[order[i]];
        if (sample.features.size() != run.inputWidth()) {
          throwValidation("sample feature width does not match network input width");
        }
        features.row(static_cast<Eigen::Index>(i - start)) = sample.features.transpose();
      }
      BatchLoss step;
      try {
        if (run.mode == TrainMode::Ours || run.mode == TrainMode::OursNoPhy) {
          std::vector<JointSet> targets;
          targets.reserve(end - start);
          for (std::size_t i = start; i < end; ++i) {
            targets.push_back(dataset[order[i]].gt_joints);
          }
          step = backwardThroughModel(run, features, targets, skeleton, lambda);
        } else {
          Eigen::MatrixXd targets(rows, run.outputWidth());
          for (std::size_t i = start; i < end; ++i) {
            const Sample& sample = dataset[order[i]];
            targets.row(static_cast<Eigen::Index>(i - start)) = run.mode == TrainMode::DirectParameter
                ? Eigen::RowVectorXd(sample.gt_theta.transpose())
                : flattenEvalJoints(skeleton, sample.gt_joints);
          }
          step = backwardDirect(run, features, targets);
        }
        checkFiniteLoss(step.loss, step.gradients);
      } catch (const NumericalError&) {
        throwNumerical(
            "non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batchIndex));
      } catch (const ValidationError& e) {
        // A non-finite network output surfaces as a pose validation error in F.
        if (std::string(e.what()).find("not finite") != std::string::npos) {
          throwNumerical(
              "non-finite network output at epoch " + std::to_string(epoch) + ", batch " +
              std::to_string(batchIndex));
        }
        throw;
      }
      lossSum += step.loss * static_cast<double>(rows);
      sgdStep(run, step.gradients, config);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = lossSum / static_cast<double>(dataset.size());
    record.val_joint_error_mm = kNaN;
    record.val_angle_error_deg = kNaN;
    record.val_invalid_fraction = kNaN;
    if (!validation.empty()) {
      MetricsReport report;
      if (emitsPose(run.mode)) {
        const std::vector<PoseParams> poses = predictPoses(run, validation);
        report = evaluatePoses(skeleton, poses, validation, thresholds);
      } else {
        const std::vector<JointSet> joints = predictJoints(run, skeleton, validation);
        report = evaluateJoints(skeleton, joints, {}, validation, thresholds);
      }
      record.val_joint_error_mm = report.avg_joint_error_mm;
      record.val_angle_error_deg = report.avg_angle_error_deg;
      record.val_invalid_fraction = report.invalid_pose_fraction;
    }
    run.history.push_back(record);
    if (on_epoch) {
      on_epoch(record);
    }
    if (!validation.empty() && shouldStop(run.history, config)) {
      run.stopped_early = true;
      break;
    }
  }
}

}  // namespace kinedeep

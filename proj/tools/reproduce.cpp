#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "cli.h"
#include "kinedeep/dataset.h"
#include "kinedeep/error.h"
#include "kinedeep/ik_pso.h"

namespace kinedeep::cli {
namespace {

constexpr TrainMode kModes[] = {
    TrainMode::DirectJoint, TrainMode::DirectParameter, TrainMode::Ours, TrainMode::OursNoPhy};

struct Published {
  const char* joint_mm;
  const char* angle_deg;
  const char* invalid;
};

// Published NYU depth-image results, for context.
Published published(TrainMode mode) {
  switch (mode) {
    case TrainMode::DirectJoint:
      return {"17.2", "21.4", "-"};
    case TrainMode::DirectParameter:
      return {"26.7", "12.2", "-"};
    case TrainMode::Ours:
      return {"16.9", "12.0", "0.009"};
    case TrainMode::OursNoPhy:
      return {"-", "-", "0.186"};
  }
  return {"-", "-", "-"};
}

template <typename F>
auto stage(const std::string& name, F&& body) {
  try {
    return body();
  } catch (const ValidationError& e) {
    throw ValidationError("stage " + name + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError("stage " + name + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error("stage " + name + ": " + e.what());
  }
}

void validate(const ReproduceConfig& c) {
  if (c.train_size < 1 || c.val_size < 1) {
    throwValidation("reproduce: dataset sizes must be >= 1");
  }
  if (c.hidden_width < 1) {
    throwValidation("reproduce: hidden width must be >= 1");
  }
  if (!(c.length_scale_mm > 0.0)) {
    throwValidation("reproduce: length scale must be > 0");
  }
  if (!(c.view_half_range_deg > 0.0)) {
    throwValidation("reproduce: view half range must be > 0");
  }
}

std::string fixed(double value, int digits) {
  if (std::isnan(value)) {
    return "-";
  }
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", digits, value);
  return buffer;
}

nlohmann::ordered_json numberOrNull(double value) {
  return std::isnan(value) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(value);
}

}  // namespace

const ModeResult& ReproduceReport::result(TrainMode mode) const {
  for (const ModeResult& r : modes) {
    if (r.mode == mode) {
      return r;
    }
  }
  throwValidation("reproduce: no result for mode " + std::string(toString(mode)));
}

bool ReproduceReport::passed() const {
  return !checks.empty() &&
         std::all_of(checks.begin(), checks.end(), [](const OrderingCheck& c) { return c.passed; });
}

ReproduceReport runReproduce(const ReproduceConfig& config, std::ostream* progress) {
  validate(config);
  const Skeleton& hand = defaultHand();
  const Stopwatch clock;
  const auto log = [&](const std::string& line) {
    if (progress != nullptr) {
      char stamp[32];
      std::snprintf(stamp, sizeof(stamp), "[%7.1fs] ", clock.seconds());
      *progress << stamp << line << std::endl;
    }
  };

  DatasetConfig data;
  data.noise_sigma_mm = config.noise_sigma_mm;
  data.occlusion_prob = config.occlusion_prob;
  data.sampling = viewLimitedBox(hand, config.view_half_range_deg);

  const auto datasets = stage("synthesize", [&] {
    DatasetConfig train_config = data;
    train_config.n = config.train_size;
    train_config.seed = config.seed;
    DatasetConfig val_config = data;
    val_config.n = config.val_size;
    val_config.seed = config.seed + 1;
    return std::make_pair(makeDataset(hand, train_config), makeDataset(hand, val_config));
  });
  const std::vector<Sample>& train_set = datasets.first;
  const std::vector<Sample>& val_set = datasets.second;
  log("synthesized " + std::to_string(train_set.size()) + " train / " + std::to_string(val_set.size()) +
      " val samples");

  SgdConfig sgd;
  sgd.batch_size = config.batch_size;
  sgd.learning_rate = config.learning_rate;
  sgd.momentum = config.momentum;
  sgd.epochs = config.epochs;
  sgd.lambda = config.lambda;
  sgd.patience = config.patience;
  validateSgdConfig(sgd);

  const int input_width = featureWidth(hand, data);
  const std::vector<double> thresholds = defaultThresholds();

  ReproduceReport report;
  report.config = config;
  for (const TrainMode mode : kModes) {
    const std::string name(toString(mode));
    MlpConfig net{{input_width, config.hidden_width, config.hidden_width, outputWidth(hand, mode)}, config.seed + 2};
    TrainRun run = initRun(net, mode);
    setLengthScale(run, hand, config.length_scale_mm);

    SgdConfig mode_sgd = sgd;
    if (mode == TrainMode::OursNoPhy) {
      mode_sgd.lambda = 0.0;
    }
    stage("train " + name, [&] {
      train(run, train_set, val_set, hand, mode_sgd, [&](const EpochRecord& r) {
        if (r.epoch % 10 == 0) {
          log(name + " epoch " + std::to_string(r.epoch) + " val joint error " + fixed(r.val_joint_error_mm, 3) +
              " mm");
        }
      });
      return 0;
    });
    log(name + " trained for " + std::to_string(run.history.size()) + " epochs" +
        (run.stopped_early ? " (early stop)" : ""));

    ModeResult result;
    result.mode = mode;
    result.epochs_run = static_cast<int>(run.history.size());
    result.stopped_early = run.stopped_early;
    if (emitsPose(mode)) {
      result.metrics = stage("evaluate " + name, [&] {
        const std::vector<PoseParams> poses = predictPoses(run, val_set);
        return evaluatePoses(hand, poses, val_set, thresholds);
      });
    } else {
      const std::vector<JointSet> joints = predictJoints(run, hand, val_set);
      PsoConfig pso;
      pso.swarm_size = config.ik_swarm;
      pso.iterations = config.ik_iterations;
      pso.seed = config.seed;
      const std::vector<PoseParams> fitted = stage("fit " + name, [&] {
        std::vector<PoseParams> poses;
        poses.reserve(joints.size());
        double residual = 0.0;
        for (const JointSet& j : joints) {
          const FitResult fit = anglesFromJoints(hand, j, pso);
          residual += fit.residual_mm;
          poses.push_back(fit.theta);
        }
        result.ik_residual_mm = residual / static_cast<double>(joints.size());
        return poses;
      });
      log(name + " poses fitted, mean residual " + fixed(result.ik_residual_mm, 3) + " mm");
      result.metrics = stage("evaluate " + name, [&] {
        return evaluateJoints(hand, joints, fitted, val_set, thresholds);
      });
    }
    report.modes.push_back(result);
  }
  report.checks = orderingChecks(report.modes);
  return report;
}

std::vector<OrderingCheck> orderingChecks(const std::vector<ModeResult>& modes) {
  ReproduceReport lookup;
  lookup.modes = modes;
  const MetricsReport& ours = lookup.result(TrainMode::Ours).metrics;
  const MetricsReport& no_phy = lookup.result(TrainMode::OursNoPhy).metrics;
  const MetricsReport& direct_joint = lookup.result(TrainMode::DirectJoint).metrics;
  const MetricsReport& direct_parameter = lookup.result(TrainMode::DirectParameter).metrics;

  std::vector<OrderingCheck> checks;
  checks.push_back({"joint_error_ours_le_direct_parameter",
                    fixed(ours.avg_joint_error_mm, 4) + " <= " + fixed(direct_parameter.avg_joint_error_mm, 4),
                    ours.avg_joint_error_mm <= direct_parameter.avg_joint_error_mm});
  checks.push_back({"angle_error_ours_lt_direct_joint_ik",
                    fixed(ours.avg_angle_error_deg, 4) + " < " + fixed(direct_joint.avg_angle_error_deg, 4),
                    ours.avg_angle_error_deg < direct_joint.avg_angle_error_deg});
  checks.push_back({"invalid_ours_le_1pct",
                    fixed(ours.invalid_pose_fraction, 4) + " <= 0.0100",
                    ours.invalid_pose_fraction <= 0.01});
  checks.push_back({"invalid_ours_lt_ours_no_phy",
                    fixed(ours.invalid_pose_fraction, 4) + " < " + fixed(no_phy.invalid_pose_fraction, 4),
                    ours.invalid_pose_fraction < no_phy.invalid_pose_fraction});
  return checks;
}

std::string reproduceTable(const ReproduceReport& report) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-18s %12s %12s %10s %8s | %12s %12s %10s\n", "mode", "joint (mm)",
                "angle (deg)", "invalid", "epochs", "NYU joint", "NYU angle", "NYU inv");
  out += line;
  for (const ModeResult& r : report.modes) {
    const Published p = published(r.mode);
    std::string mode(toString(r.mode));
    if (r.mode == TrainMode::DirectJoint) {
      mode += "+ik";
    }
    std::snprintf(line, sizeof(line), "%-18s %12s %12s %10s %8d | %12s %12s %10s\n", mode.c_str(),
                  fixed(r.metrics.avg_joint_error_mm, 4).c_str(), fixed(r.metrics.avg_angle_error_deg, 4).c_str(),
                  fixed(r.metrics.invalid_pose_fraction, 4).c_str(), r.epochs_run, p.joint_mm, p.angle_deg,
                  p.invalid);
    out += line;
  }
  out += "NYU columns are published depth-image results, shown for context only\n";
  for (const OrderingCheck& c : report.checks) {
    out += (c.passed ? "PASS " : "FAIL ") + c.name + "  (" + c.detail + ")\n";
  }
  return out;
}

nlohmann::ordered_json reproduceConfigToJson(const ReproduceConfig& c) {
  return {{"seed", c.seed},
          {"train_size", c.train_size},
          {"val_size", c.val_size},
          {"noise_sigma_mm", c.noise_sigma_mm},
          {"occlusion_prob", c.occlusion_prob},
          {"view_half_range_deg", c.view_half_range_deg},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"momentum", c.momentum},
          {"lambda", c.lambda},
          {"patience", c.patience},
          {"length_scale_mm", c.length_scale_mm},
          {"hidden_width", c.hidden_width},
          {"ik_swarm", c.ik_swarm},
          {"ik_iterations", c.ik_iterations}};
}

nlohmann::ordered_json reproduceToJson(const ReproduceReport& report) {
  nlohmann::ordered_json doc;
  doc["config"] = reproduceConfigToJson(report.config);
  nlohmann::ordered_json modes = nlohmann::ordered_json::array();
  for (const ModeResult& r : report.modes) {
    nlohmann::ordered_json curve = nlohmann::ordered_json::array();
    for (const ThresholdPoint& p : r.metrics.max_error_curve) {
      curve.push_back({{"threshold_mm", p.threshold_mm}, {"fraction", p.fraction}});
    }
    nlohmann::ordered_json entry = {{"mode", std::string(toString(r.mode))},
                                    {"avg_joint_error_mm", r.metrics.avg_joint_error_mm},
                                    {"avg_angle_error_deg", numberOrNull(r.metrics.avg_angle_error_deg)},
                                    {"invalid_pose_fraction", numberOrNull(r.metrics.invalid_pose_fraction)},
                                    {"epochs_run", r.epochs_run},
                                    {"stopped_early", r.stopped_early},
                                    {"max_error_curve", std::move(curve)}};
    if (r.mode == TrainMode::DirectJoint) {
      entry["ik_residual_mm"] = r.ik_residual_mm;
    }
    modes.push_back(std::move(entry));
  }
  doc["modes"] = std::move(modes);
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const OrderingCheck& c : report.checks) {
    checks.push_back({{"name", c.name}, {"detail", c.detail}, {"passed", c.passed}});
  }
  doc["checks"] = std::move(checks);
  doc["passed"] = report.passed();
  return doc;
}

}  // namespace kinedeep::cli

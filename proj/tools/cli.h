#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "kinedeep/metrics.h"
#include "kinedeep/regressor.h"
#include "kinedeep/skeleton.h"

#include "json.hpp"

namespace kinedeep::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumerical = 2;
inline constexpr int kExitCheckFailed = 3;

inline constexpr const char* kToolVersion = "0.1.0";

/// Parses argv, dispatches to a subcommand and maps exceptions to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// ---- run manifest

struct RunManifest {
  std::string subcommand;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  double duration_s = 0.0;
};

std::string manifestToJson(const RunManifest& manifest);
/// `<artifact>.manifest.json` next to the artifact.
std::filesystem::path manifestPathFor(const std::filesystem::path& artifact);
void writeManifest(const std::filesystem::path& artifact, const RunManifest& manifest);

// ---- gradcheck

struct GradcheckSuite {
  std::string name;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  int trials = 0;

  bool passed() const {
    return max_relative_error < tolerance;
  }
};

struct GradcheckReport {
  std::vector<GradcheckSuite> suites;

  bool passed() const;
};

inline constexpr double kKinematicsTolerance = 1e-6;
inline constexpr double kEndToEndTolerance = 1e-5;

/// Central-difference checks of the FK Jacobian, the joint loss, the
/// constraint loss and the network-through-model gradient.
GradcheckReport runGradcheck(const Skeleton& skeleton, int trials, std::uint64_t seed);
std::string gradcheckToText(const GradcheckReport& report);
nlohmann::ordered_json gradcheckToJson(const GradcheckReport& report);

// ---- reproduce

struct ReproduceConfig {
  std::uint64_t seed = 0;
  int train_size = 20000;
  int val_size = 2000;
  double noise_sigma_mm = 10.0;
  double occlusion_prob = 0.1;
  /// Global rotation sampling window, +- degrees.
  double view_half_range_deg = 30.0;
  int epochs = 200;
  int batch_size = 64;
  double learning_rate = 0.003;
  double momentum = 0.9;
  double lambda = 1.0;
  int patience = 10;
  double length_scale_mm = 150.0;
  int hidden_width = 256;
  /// PSO settings for fitting poses to direct_joint predictions.
  int ik_swarm = 64;
  int ik_iterations = 300;
};

struct ModeResult {
  TrainMode mode = TrainMode::Ours;
  MetricsReport metrics;
  int epochs_run = 0;
  bool stopped_early = false;
  /// Mean PSO residual when poses were fit to predicted joints.
  double ik_residual_mm = 0.0;
};

struct OrderingCheck {
  std::string name;
  std::string detail;
  bool passed = false;
};

struct ReproduceReport {
  ReproduceConfig config;
  std::vector<ModeResult> modes;
  std::vector<OrderingCheck> checks;

  const ModeResult& result(TrainMode mode) const;
  bool passed() const;
};

/// Synthesizes the datasets, trains the four modes with identical seeds and
/// budgets, fits poses to the direct_joint outputs and evaluates everything.
/// Stage failures are rethrown with the stage name prefixed.
ReproduceReport runReproduce(const ReproduceConfig& config, std::ostream* progress = nullptr);
std::vector<OrderingCheck> orderingChecks(const std::vector<ModeResult>& modes);
/// Table of joint error, angle error and invalid fraction per mode, with the
/// published numbers for context. Contains no timing, so equal seeds give
/// equal text.
std::string reproduceTable(const ReproduceReport& report);
nlohmann::ordered_json reproduceToJson(const ReproduceReport& report);
nlohmann::ordered_json reproduceConfigToJson(const ReproduceConfig& config);

// ---- small helpers shared by subcommands

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void writeText(const std::filesystem::path& path, const std::string& text);

}  // namespace kinedeep::cli

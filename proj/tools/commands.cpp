#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "cli.h"
#include "kinedeep/checkpoint.h"
#include "kinedeep/dataset.h"
#include "kinedeep/error.h"
#include "kinedeep/ik_pso.h"
#include "kinedeep/kinematics.h"
#include "kinedeep/pose_io.h"

namespace kinedeep::cli {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

void ensureParent(const fs::path& path) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
}

// Every option of the subcommand with its effective value, defaults included.
ojson resolvedOptions(const CLI::App& sub) {
  ojson config = ojson::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help") {
      continue;
    }
    if (opt->get_expected_min() == 0) {
      config[name] = opt->count() > 0;
    } else if (opt->count() > 0) {
      const std::vector<std::string>& values = opt->results();
      config[name] = values.size() == 1 ? ojson(values.front()) : ojson(values);
    } else {
      config[name] = opt->get_default_str();
    }
  }
  return config;
}

std::string skeletonSource(const std::optional<fs::path>& path) {
  if (path) {
    return path->string();
  }
  if (const char* env = std::getenv("KINEDEEP_SKELETON"); env != nullptr && *env != '\0') {
    return std::string("env:") + env;
  }
  return "builtin:hand23";
}

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::optional<fs::path> skeleton_path;
  std::uint64_t seed = 0;
};

RunManifest startManifest(const CLI::App& sub, const Context& ctx) {
  RunManifest manifest;
  manifest.subcommand = sub.get_name();
  manifest.config = resolvedOptions(sub);
  manifest.config["skeleton_source"] = skeletonSource(ctx.skeleton_path);
  manifest.seed = ctx.seed;
  return manifest;
}

void finish(RunManifest manifest, const fs::path& artifact, const Stopwatch& clock) {
  manifest.duration_s = clock.seconds();
  writeManifest(artifact, manifest);
}

// ---- fk / jacobian

int cmdFk(const CLI::App& sub, Context& ctx, const fs::path& poses_path, const fs::path& out_path) {
  const Stopwatch clock;
  const Skeleton skeleton = resolveSkeleton(ctx.skeleton_path);
  const std::vector<PoseParams> poses = readPoseFile(poses_path, skeleton);
  std::vector<JointSet> frames;
  frames.reserve(poses.size());
  KinematicsWorkspace workspace(skeleton);
  for (const PoseParams& theta : poses) {
    JointSet joints;
    workspace.forward(theta, joints);
    frames.push_back(std::move(joints));
  }
  ensureParent(out_path);
  writeJointFile(out_path, skeleton, frames);
  RunManifest manifest = startManifest(sub, ctx);
  manifest.inputs = {poses_path.string()};
  manifest.outputs = {out_path.string()};
  finish(manifest, out_path, clock);
  ctx.out << "wrote " << frames.size() << " frames to " << out_path.string() << "\n";
  return kExitOk;
}

int cmdJacobian(const CLI::App& sub, Context& ctx, const fs::path& poses_path, const fs::path& out_path) {
  const Stopwatch clock;
  const Skeleton skeleton = resolveSkeleton(ctx.skeleton_path);
  const std::vector<PoseParams> poses = readPoseFile(poses_path, skeleton);
  KinematicsWorkspace workspace(skeleton);
  std::ostringstream text;
  text << fileHeader(skeleton) << " rows=" << 3 * skeleton.jointCount() << " cols=" << skeleton.dofCount()
       << " layout=row-major\n";
  JointSet joints;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> jacobian;
  KinematicsJacobian scratch;
  for (const PoseParams& theta : poses) {
    workspace.forwardWithJacobian(theta, joints, scratch);
    jacobian = scratch;
    text << formatValues(std::span<const double>(jacobian.data(), static_cast<std::size_t>(jacobian.size())))
         << "\n";
  }
  ensureParent(out_path);
  writeText(out_path, text.str());
  RunManifest manifest = startManifest(sub, ctx);
  manifest.inputs = {poses_path.string()};
  manifest.outputs = {out_path.string()};
  finish(manifest, out_path, clock);
  ctx.out << "wrote " << poses.size() << " jacobians to " << out_path.string() << "\n";
  return kExitOk;
}

// ---- gradcheck

int cmdGradcheck(const CLI::App& sub, Context& ctx, int trials, const std::optional<fs::path>& report_path) {
  const Stopwatch clock;
  const Skeleton skeleton = resolveSkeleton(ctx.skeleton_path);
  const GradcheckReport report = runGradcheck(skeleton, trials, ctx.seed);
  ctx.out << gradcheckToText(report);
  if (report_path) {
    ensureParent(*report_path);
    writeText(*report_path, gradcheckToJson(report).dump(2) + "\n");
    RunManifest manifest = startManifest(sub, ctx);
    manifest.outputs = {report_path->string()};
    finish(manifest, *report_path, clock);
  }
  return report.passed() ? kExitOk : kExitCheckFailed;
}

// ---- ik

struct IkOptions {
  fs::path targets;
  fs::path out;
  std::optional<fs::path> report;
  int swarm = 64;
  int iterations = 300;
  bool warm_start = false;
  bool polish = false;
};

int cmdIk(const CLI::App& sub, Context& ctx, const IkOptions& o) {
  const Stopwatch clock;
  const Skeleton skeleton = resolveSkeleton(ctx.skeleton_path);
  const std::vector<JointSet> targets = readJointFile(o.targets, skeleton);
  PsoConfig config;
  config.swarm_size = o.swarm;
  config.iterations = o.iterations;
  config.seed = ctx.seed;
  config.polish = o.polish;
  validatePsoConfig(config);

  BatchFitResult batch;
  if (!targets.empty()) {
    batch = fitBatch(skeleton, targets, config, o.warm_start);
  }
  std::vector<PoseParams> poses;
  for (const FitResult& f : batch.frames) {
    poses.push_back(f.theta);
  }
  ensureParent(o.out);
  writePoseFile(o.out, skeleton, poses);

  const fs::path report_path = o.report ? *o.report : fs::path(o.out.string() + ".report.json");
  ojson report;
  report["frames"] = batch.frames.size();
  report["mean_residual_mm"] = batch.mean_residual_mm;
  report["variance_residual_mm2"] = batch.variance_residual_mm2;
  report["total_iterations"] = batch.total_iterations;
  ojson frames = ojson::array();
  for (const FitResult& f : batch.frames) {
    frames.push_back(
        {{"residual_mm", f.residual_mm}, {"iterations_used", f.iterations_used}, {"converged", f.converged}});
  }
  report["per_frame"] = std::move(frames);
  ensureParent(report_path);
  writeText(report_path, report.dump(2) + "\n");

  RunManifest manifest = startManifest(sub, ctx);
  manifest.inputs = {o.targets.string()};
  manifest.outputs = {o.out.string(), report_path.string()};
  finish(manifest, o.out, clock);

  ctx.out << "frames " << batch.frames.size() << "\n";
  ctx.out << "mean_residual_mm " << batch.mean_residual_mm << "\n";
  ctx.out << "variance_residual_mm2 " << batch.variance_residual_mm2 << "\n";
  return kExitOk;
}

// ---- synth

struct SynthOptions {
  fs::path out;
  int n = 1000;
  double sigma = 10.0;
  double occlusion = 0.1;
  double view_limit_deg = 0.0;
  bool eval_only = false;
};

int cmdSynth(const CLI::App& sub, Context& ctx, const SynthOptions& o) {
  const Stopwatch clock;
  const Skeleton skeleton = resolveSkeleton(ctx.skeleton_path);
  DatasetFile file;
  file.skeleton_name = skeleton.name();
  file.config.n = o.n;
  file.config.noise_sigma_mm = o.sigma;
  file.config.occlusion_prob = o.occlusion;
  file.config.seed = ctx.seed;
  file.config.eval_joints_only = o.eval_only;
  if (o.view_limit_deg > 0.0) {
    file.config.sampling = viewLimitedBox(skeleton, o.view_limit_deg);
  }
  file.samples = makeDataset(skeleton, file.config);
  ensureParent(o.out);
  writeDataset(o.out, skeleton, file);
  RunManifest manifest = startManifest(sub, ctx);
  manifest.outputs = {o.out.string()};
  finish(manifest, o.out, clock);
  ctx.out << "wrote " << file.samples.size() << " samples to " << o.out.string() << "\n";
  return kExitOk;
}

// ---- train

struct TrainOptions {
  std::string mode = "ours";
  double lr = 0.003;
  double momentum = 0.9;
  int batch = 64;
  int epochs = 200;
  double lambda = 1.0;
  int patience = 10;
  double length_scale = 150.0;
  std::vector<int> hidden{256, 256};
  fs::path train;
  std::optional<fs::path> val;
  fs::path out;
};

int cmdTrain(const CLI::App& sub, Context& ctx, const TrainOptions& o) {
  const Stopwatch clock;
  const Skeleton skeleton = resolveSkeleton(ctx.skeleton_path);
  const TrainMode mode = parseTrainMode(o.mode);
  SgdConfig sgd;
  sgd.batch_size = o.batch;
  sgd.learning_rate = o.lr;
  sgd.momentum = o.momentum;
  sgd.epochs = o.epochs;
  sgd.lambda = mode == TrainMode::Ours ? o.lambda : 0.0;
  sgd.patience = o.patience;
  validateSgdConfig(sgd);

  const DatasetFile train_file = readDataset(o.train, skeleton);
  DatasetFile val_file;
  if (o.val) {
    val_file = readDataset(*o.val, skeleton);
  }
  if (train_file.samples.empty()) {
    throwValidation("train: dataset " + o.train.string() + " is empty");
  }

  MlpConfig net;
  net.seed = ctx.seed;
  net.layer_widths.push_back(static_cast<int>(train_file.samples.front().features.size()));
  for (const int w : o.hidden) {
    if (w < 1) {
      throwValidation("train: hidden widths must be >= 1");
    }
    net.layer_widths.push_back(w);
  }
  net.layer_widths.push_back(outputWidth(skeleton, mode));
  TrainRun run = initRun(net, mode);
  setLengthScale(run, skeleton, o.length_scale);

  train(run, train_file.samples, val_file.samples, skeleton, sgd, [&](const EpochRecord& r) {
    if (r.epoch % 10 == 0) {
      ctx.err << "epoch " << r.epoch << " loss " << r.train_loss << " val joint error " << r.val_joint_error_mm
              << " mm\n";
    }
  });
  ensureParent(o.out);
  saveCheckpoint(o.out, run);

  RunManifest manifest = startManifest(sub, ctx);
  manifest.inputs = {o.train.string()};
  if (o.val) {
    manifest.inputs.push_back(o.val->string());
  }
  manifest.outputs = {o.out.string()};
  finish(manifest, o.out, clock);

  const EpochRecord& last = run.history.back();
  ctx.out << "mode " << toString(mode) << " epochs " << run.history.size() << (run.stopped_early ? " (early stop)" : "")
          << "\n";
  ctx.out << "final train loss " << last.train_loss << "\n";
  if (o.val) {
    ctx.out << "final val joint error mm " << last.val_joint_error_mm << "\n";
  }
  return kExitOk;
}

// ---- eval

struct EvalOptions {
  fs::path checkpoint;
  fs::path data;
  std::optional<fs::path> out;
  std::optional<fs::path> curve;
  int ik_swarm = 64;
  int ik_iterations = 300;
};

int cmdEval(const CLI::App& sub, Context& ctx, const EvalOptions& o) {
  const Stopwatch clock;
  const Skeleton skeleton = resolveSkeleton(ctx.skeleton_path);
  const TrainRun run = loadCheckpoint(o.checkpoint);
  const DatasetFile data = readDataset(o.data, skeleton);
  const std::vector<double> thresholds = defaultThresholds();

  MetricsReport report;
  if (emitsPose(run.mode)) {
    const std::vector<PoseParams> poses = predictPoses(run, data.samples);
    report = evaluatePoses(skeleton, poses, data.samples, thresholds);
  } else {
    const std::vector<JointSet> joints = predictJoints(run, skeleton, data.samples);
    PsoConfig pso;
    pso.swarm_size = o.ik_swarm;
    pso.iterations = o.ik_iterations;
    pso.seed = ctx.seed;
    std::vector<PoseParams> fitted;
    for (const JointSet& j : joints) {
      fitted.push_back(anglesFromJoints(skeleton, j, pso).theta);
    }
    report = evaluateJoints(skeleton, joints, fitted, data.samples, thresholds);
  }
  ctx.out << "mode " << toString(run.mode) << "\n" << metricsToTable(report);

  RunManifest manifest = startManifest(sub, ctx);
  manifest.inputs = {o.checkpoint.string(), o.data.string()};
  if (o.out) {
    ensureParent(*o.out);
    writeText(*o.out, metricsToJson(report));
    manifest.outputs.push_back(o.out->string());
  }
  if (o.curve) {
    ensureParent(*o.curve);
    writeText(*o.curve, curveToCsv(report));
    manifest.outputs.push_back(o.curve->string());
  }
  if (o.out) {
    finish(manifest, *o.out, clock);
  } else if (o.curve) {
    finish(manifest, *o.curve, clock);
  }
  return kExitOk;
}

// ---- reproduce

int cmdReproduce(const CLI::App& sub, Context& ctx, ReproduceConfig config, const fs::path& out_dir, bool quiet) {
  const Stopwatch clock;
  config.seed = ctx.seed;
  fs::create_directories(out_dir);
  const ReproduceReport report = runReproduce(config, quiet ? nullptr : &ctx.err);
  const std::string table = reproduceTable(report);
  ctx.out << table;

  const fs::path table_path = out_dir / "table.txt";
  const fs::path json_path = out_dir / "report.json";
  writeText(table_path, table);
  writeText(json_path, reproduceToJson(report).dump(2) + "\n");
  RunManifest manifest = startManifest(sub, ctx);
  manifest.config["skeleton_source"] = "builtin:hand23";
  manifest.config["resolved"] = reproduceConfigToJson(config);
  manifest.outputs = {table_path.string(), json_path.string()};
  finish(manifest, json_path, clock);
  finish(manifest, table_path, clock);
  return report.passed() ? kExitOk : kExitCheckFailed;
}

void addSkeletonOption(CLI::App* sub, Context& ctx) {
  sub->add_option("--skeleton", ctx.skeleton_path, "Skeleton config (JSON); defaults to $KINEDEEP_SKELETON or the built-in hand");
}

void addSeedOption(CLI::App* sub, Context& ctx) {
  sub->add_option("--seed", ctx.seed, "Random seed");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"kinedeep: differentiable hand kinematics, model-based regression and PSO fitting"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  Context ctx{out, err, std::nullopt, 0};
  std::function<int()> action;

  fs::path poses_path;
  fs::path out_path;
  CLI::App* fk = app.add_subcommand("fk", "Forward kinematics of every pose in a pose file");
  addSkeletonOption(fk, ctx);
  fk->add_option("--poses", poses_path, "Pose file")->required();
  fk->add_option("--out", out_path, "Joint file to write")->required();
  fk->callback([&] { action = [&] { return cmdFk(*fk, ctx, poses_path, out_path); }; });

  CLI::App* jac = app.add_subcommand("jacobian", "Jacobian of every pose in a pose file, one row-major line per pose");
  addSkeletonOption(jac, ctx);
  jac->add_option("--poses", poses_path, "Pose file")->required();
  jac->add_option("--out", out_path, "Output file")->required();
  jac->callback([&] { action = [&] { return cmdJacobian(*jac, ctx, poses_path, out_path); }; });

  int trials = 100;
  std::optional<fs::path> gradcheck_report;
  CLI::App* gc = app.add_subcommand("gradcheck", "Finite-difference checks of the Jacobian, losses and network gradient");
  addSkeletonOption(gc, ctx);
  addSeedOption(gc, ctx);
  gc->add_option("--trials", trials, "Random poses per suite")->check(CLI::PositiveNumber);
  gc->add_option("--report", gradcheck_report, "Write a JSON report here");
  gc->callback([&] { action = [&] { return cmdGradcheck(*gc, ctx, trials, gradcheck_report); }; });

  IkOptions ik_options;
  CLI::App* ik = app.add_subcommand("ik", "Fit poses to target joint sets with particle swarm optimization");
  addSkeletonOption(ik, ctx);
  addSeedOption(ik, ctx);
  ik->add_option("--targets", ik_options.targets, "Joint file with target frames")->required();
  ik->add_option("--out", ik_options.out, "Pose file to write")->required();
  ik->add_option("--report", ik_options.report, "JSON report (default: <out>.report.json)");
  ik->add_option("--swarm", ik_options.swarm, "Particles")->check(CLI::PositiveNumber);
  ik->add_option("--iters", ik_options.iterations, "Iterations per frame")->check(CLI::PositiveNumber);
  ik->add_flag("--warm-start", ik_options.warm_start, "Start each frame around the previous solution");
  ik->add_flag("--polish", ik_options.polish, "Refine the swarm's best pose with bounded Levenberg-Marquardt");
  ik->callback([&] { action = [&] { return cmdIk(*ik, ctx, ik_options); }; });

  SynthOptions synth_options;
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  addSkeletonOption(synth, ctx);
  addSeedOption(synth, ctx);
  synth->add_option("--out", synth_options.out, "Dataset file to write")->required();
  synth->add_option("--n", synth_options.n, "Samples")->check(CLI::PositiveNumber);
  synth->add_option("--sigma", synth_options.sigma, "Feature noise standard deviation, mm");
  synth->add_option("--occlusion", synth_options.occlusion, "Per-joint occlusion probability");
  synth->add_option("--view-limit", synth_options.view_limit_deg,
                    "Sample global rotation within +-deg (0: full bounds)");
  synth->add_flag("--eval-joints-only", synth_options.eval_only, "Features from eval joints only");
  synth->callback([&] { action = [&] { return cmdSynth(*synth, ctx, synth_options); }; });

  TrainOptions train_options;
  CLI::App* tr = app.add_subcommand("train", "Train a regressor and write a checkpoint");
  addSkeletonOption(tr, ctx);
  addSeedOption(tr, ctx);
  tr->add_option("--mode", train_options.mode, "ours, ours_no_phy, direct_joint or direct_parameter")
      ->check(CLI::IsMember({"ours", "ours_no_phy", "direct_joint", "direct_parameter"}));
  tr->add_option("--lr", train_options.lr, "Learning rate");
  tr->add_option("--momentum", train_options.momentum, "Momentum");
  tr->add_option("--batch", train_options.batch, "Batch size");
  tr->add_option("--epochs", train_options.epochs, "Maximum epochs");
  tr->add_option("--lambda", train_options.lambda, "Weight of the angle-range penalty (mode ours)");
  tr->add_option("--patience", train_options.patience, "Early-stop window in epochs (0: off)");
  tr->add_option("--length-scale", train_options.length_scale, "Input/output normalization length, mm");
  tr->add_option("--hidden", train_options.hidden, "Hidden layer widths")->delimiter(',');
  tr->add_option("--train", train_options.train, "Training dataset")->required();
  tr->add_option("--val", train_options.val, "Validation dataset");
  tr->add_option("--out", train_options.out, "Checkpoint to write")->required();
  tr->callback([&] { action = [&] { return cmdTrain(*tr, ctx, train_options); }; });

  EvalOptions eval_options;
  CLI::App* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  addSkeletonOption(ev, ctx);
  addSeedOption(ev, ctx);
  ev->add_option("--checkpoint", eval_options.checkpoint, "Checkpoint file")->required();
  ev->add_option("--data", eval_options.data, "Dataset file")->required();
  ev->add_option("--out", eval_options.out, "Metrics JSON");
  ev->add_option("--curve", eval_options.curve, "Threshold curve CSV");
  ev->add_option("--ik-swarm", eval_options.ik_swarm, "PSO particles for direct_joint pose fitting");
  ev->add_option("--ik-iters", eval_options.ik_iterations, "PSO iterations for direct_joint pose fitting");
  ev->callback([&] { action = [&] { return cmdEval(*ev, ctx, eval_options); }; });

  ReproduceConfig repro;
  fs::path repro_dir;
  bool quiet = false;
  CLI::App* rp = app.add_subcommand("reproduce", "Train and compare all four modes on synthetic data");
  addSeedOption(rp, ctx);
  rp->add_option("--out", repro_dir, "Output directory")->required();
  rp->add_option("--train-size", repro.train_size, "Training samples");
  rp->add_option("--val-size", repro.val_size, "Validation samples");
  rp->add_option("--epochs", repro.epochs, "Maximum epochs per mode");
  rp->add_option("--hidden-width", repro.hidden_width, "Width of both hidden layers");
  rp->add_option("--ik-iters", repro.ik_iterations, "PSO iterations for direct_joint pose fitting");
  rp->add_flag("--quiet", quiet, "No progress output");
  rp->callback([&] { action = [&] { return cmdReproduce(*rp, ctx, repro, repro_dir, quiet); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    return action();
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace kinedeep::cli

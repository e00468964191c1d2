#include "kinedeep/checkpoint.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "kinedeep/error.h"

namespace kinedeep {

namespace {

using nlohmann::json;

constexpr std::string_view kFormat = "kinedeep-checkpoint";

json matrixToJson(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      row.push_back(m(r, c));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrixFromJson(const json& node, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  if (!node.is_array() || static_cast<Eigen::Index>(node.size()) != rows) {
    throwValidation("checkpoint: '" + what + "' has the wrong number of rows");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = node[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throwValidation("checkpoint: '" + what + "' has the wrong number of columns");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

Eigen::RowVectorXd vectorFromJson(const json& node, Eigen::Index size, const std::string& what) {
  if (!node.is_array() || static_cast<Eigen::Index>(node.size()) != size) {
    throwValidation("checkpoint: '" + what + "' has the wrong length");
  }
  Eigen::RowVectorXd v(size);
  for (Eigen::Index i = 0; i < size; ++i) {
    v[i] = node[static_cast<std::size_t>(i)].get<double>();
  }
  return v;
}

json vectorToJson(const Eigen::RowVectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

json numberOrNull(double v) {
  return std::isnan(v) ? json(nullptr) : json(v);
}

double numberOrNaN(const json& node) {
  return node.is_null() ? std::numeric_limits<double>::quiet_NaN() : node.get<double>();
}

}  // namespace

std::string checkpointToJson(const TrainRun& run) {
  json doc;
  doc["format"] = kFormat;
  doc["version"] = kCheckpointVersion;
  doc["mode"] = std::string(toString(run.mode));
  doc["seed"] = run.config.seed;
  doc["layer_widths"] = run.config.layer_widths;
  doc["length_scale_mm"] = run.length_scale_mm;
  doc["output_scale"] = vectorToJson(run.output_scale);
  doc["sgd"] = {
      {"batch_size", run.sgd.batch_size},
      {"learning_rate", run.sgd.learning_rate},
      {"momentum", run.sgd.momentum},
      {"epochs", run.sgd.epochs},
      {"lambda", run.sgd.lambda},
      {"patience", run.sgd.patience},
      {"min_relative_improvement", run.sgd.min_relative_improvement}};
  json layers = json::array();
  for (const DenseLayer& layer : run.layers) {
    layers.push_back(
        {{"weights", matrixToJson(layer.weights)},
         {"bias", vectorToJson(layer.bias)},
         {"weight_velocity", matrixToJson(layer.weight_velocity)},
         {"bias_velocity", vectorToJson(layer.bias_velocity)}});
  }
  doc["layers"] = std::move(layers);
  json history = json::array();
  for (const EpochRecord& record : run.history) {
    history.push_back(
        {{"epoch", record.epoch},
         {"train_loss", numberOrNull(record.train_loss)},
         {"val_joint_error_mm", numberOrNull(record.val_joint_error_mm)},
         {"val_angle_error_deg", numberOrNull(record.val_angle_error_deg)},
         {"val_invalid_fraction", numberOrNull(record.val_invalid_fraction)}});
  }
  doc["history"] = std::move(history);
  doc["stopped_early"] = run.stopped_early;
  return doc.dump() + "\n";
}

TrainRun checkpointFromJson(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throwValidation(std::string("checkpoint parse failure: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", std::string{}) != kFormat) {
    throwValidation("not a kinedeep checkpoint");
  }
  if (doc.value("version", 0) != kCheckpointVersion) {
    throwValidation("unsupported checkpoint version " + std::to_string(doc.value("version", 0)));
  }
  try {
    MlpConfig config;
    config.layer_widths = doc.at("layer_widths").get<std::vector<int>>();
    config.seed = doc.at("seed").get<std::uint64_t>();
    TrainRun run = initRun(config, parseTrainMode(doc.at("mode").get<std::string>()));
    run.length_scale_mm = doc.at("length_scale_mm").get<double>();
    run.output_scale = vectorFromJson(doc.at("output_scale"), run.outputWidth(), "output_scale");
    const json& sgd = doc.at("sgd");
    run.sgd.batch_size = sgd.at("batch_size").get<int>();
    run.sgd.learning_rate = sgd.at("learning_rate").get<double>();
    run.sgd.momentum = sgd.at("momentum").get<double>();
    run.sgd.epochs = sgd.at("epochs").get<int>();
    run.sgd.lambda = sgd.at("lambda").get<double>();
    run.sgd.patience = sgd.at("patience").get<int>();
    run.sgd.min_relative_improvement = sgd.at("min_relative_improvement").get<double>();
    const json& layers = doc.at("layers");
    if (!layers.is_array() || layers.size() != run.layers.size()) {
      throwValidation("checkpoint layer count does not match its widths");
    }
    for (std::size_t l = 0; l < run.layers.size(); ++l) {
      DenseLayer& layer = run.layers[l];
      const json& node = layers[l];
      const std::string name = "layers[" + std::to_string(l) + "]";
      layer.weights = matrixFromJson(node.at("weights"), layer.weights.rows(), layer.weights.cols(), name + ".weights");
      layer.bias = vectorFromJson(node.at("bias"), layer.bias.size(), name + ".bias");
      layer.weight_velocity = matrixFromJson(
          node.at("weight_velocity"), layer.weights.rows(), layer.weights.cols(), name + ".weight_velocity");
      layer.bias_velocity = vectorFromJson(node.at("bias_velocity"), layer.bias.size(), name + ".bias_velocity");
    }
    for (const json& node : doc.at("history")) {
      EpochRecord record;
      record.epoch = node.at("epoch").get<int>();
      record.train_loss = numberOrNaN(node.at("train_loss"));
      record.val_joint_error_mm = numberOrNaN(node.at("val_joint_error_mm"));
      record.val_angle_error_deg = numberOrNaN(node.at("val_angle_error_deg"));
      record.val_invalid_fraction = numberOrNaN(node.at("val_invalid_fraction"));
      run.history.push_back(record);
    }
    run.stopped_early = doc.value("stopped_early", false);
    return run;
  } catch (const json::exception& e) {
    throwValidation(std::string("malformed checkpoint: ") + e.what());
  }
}

void saveCheckpoint(const std::filesystem::path& path, const TrainRun& run) {
  std::ofstream out(path);
  if (!out) {
    throwValidation("cannot write checkpoint '" + path.string() + "'");
  }
  out << checkpointToJson(run);
}

TrainRun loadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throwValidation("cannot read checkpoint '" + path.string() + "'");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return checkpointFromJson(buffer.str());
}

}  // namespace kinedeep

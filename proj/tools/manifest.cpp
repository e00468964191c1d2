#include <fstream>

#include "cli.h"
#include "kinedeep/error.h"

namespace kinedeep::cli {

std::string manifestToJson(const RunManifest& manifest) {
  nlohmann::ordered_json doc;
  doc["tool"] = "kinedeep";
  doc["version"] = kToolVersion;
  doc["subcommand"] = manifest.subcommand;
  doc["seed"] = manifest.seed;
  doc["config"] = manifest.config;
  doc["inputs"] = manifest.inputs;
  doc["outputs"] = manifest.outputs;
  doc["duration_s"] = manifest.duration_s;
  return doc.dump(2) + "\n";
}

std::filesystem::path manifestPathFor(const std::filesystem::path& artifact) {
  return std::filesystem::path(artifact.string() + ".manifest.json");
}

void writeManifest(const std::filesystem::path& artifact, const RunManifest& manifest) {
  writeText(manifestPathFor(artifact), manifestToJson(manifest));
}

void writeText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream file(path, std::ios::binary);
  if (!file) {
    throwValidation("cannot open " + path.string() + " for writing");
  }
  file << text;
  if (!file) {
    throwValidation("failed writing " + path.string());
  }
}

}  // namespace kinedeep::cli

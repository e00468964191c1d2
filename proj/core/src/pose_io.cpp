#include "kinedeep/pose_io.h"

#include <charconv>
#include <cmath>
#include <fstream>

#include "kinedeep/error.h"

namespace kinedeep {

namespace {

std::string_view trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = text.find_last_not_of(" \t\r");
  return text.substr(first, last - first + 1);
}

std::vector<std::vector<double>> readRows(
    const std::filesystem::path& path,
    std::size_t width,
    const char* what) {
  std::ifstream in(path);
  if (!in) {
    throwValidation("cannot read " + std::string(what) + " file '" + path.string() + "'");
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineNumber = 0;
  while (std::getline(in, line)) {
    ++lineNumber;
    const std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') {
      continue;
    }
    std::vector<double> values = parseValues(body, lineNumber);
    if (values.size() != width) {
      throwValidation(
          path.string() + ": line " + std::to_string(lineNumber) + ": expected " + std::to_string(width) +
          " values, found " + std::to_string(values.size()));
    }
    rows.push_back(std::move(values));
  }
  return rows;
}

std::ofstream openForWrite(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throwValidation("cannot write '" + path.string() + "'");
  }
  return out;
}

}  // namespace

std::string formatValues(std::span<const double> values) {
  std::string out;
  out.reserve(values.size() * 20);
  char buffer[64];
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) {
      out.push_back(',');
    }
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), values[i]);
    out.append(buffer, result.ptr);
  }
  return out;
}

std::vector<double> parseValues(std::string_view text, int line_number) {
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string_view field = trim(text.substr(start, comma == std::string_view::npos ? comma : comma - start));
    double value = 0.0;
    const auto result = std::from_chars(field.data(), field.data() + field.size(), value);
    if (field.empty() || result.ec != std::errc{} || result.ptr != field.data() + field.size()) {
      throwValidation(
          "line " + std::to_string(line_number) + ": cannot parse value '" + std::string(field) + "'");
    }
    if (!std::isfinite(value)) {
      throwValidation("line " + std::to_string(line_number) + ": non-finite value");
    }
    values.push_back(value);
    if (comma == std::string_view::npos) {
      break;
    }
    start = comma + 1;
  }
  return values;
}

std::string fileHeader(const Skeleton& skeleton) {
  return "# skeleton=" + skeleton.name();
}

std::vector<PoseParams> readPoseFile(const std::filesystem::path& path, const Skeleton& skeleton) {
  std::vector<PoseParams> poses;
  for (const auto& row : readRows(path, static_cast<std::size_t>(skeleton.dofCount()), "pose")) {
    poses.push_back(Eigen::Map<const PoseParams>(row.data(), skeleton.dofCount()));
  }
  return poses;
}

void writePoseFile(const std::filesystem::path& path, const Skeleton& skeleton, std::span<const PoseParams> poses) {
  std::ofstream out = openForWrite(path);
  out << fileHeader(skeleton) << '\n';
  for (const PoseParams& pose : poses) {
    checkPoseSize(skeleton, pose);
    out << formatValues({pose.data(), static_cast<std::size_t>(pose.size())}) << '\n';
  }
}

std::vector<JointSet> readJointFile(const std::filesystem::path& path, const Skeleton& skeleton) {
  std::vector<JointSet> frames;
  const int joints = skeleton.jointCount();
  for (const auto& row : readRows(path, static_cast<std::size_t>(3 * joints), "joint")) {
    frames.push_back(Eigen::Map<const JointSet>(row.data(), joints, 3));
  }
  return frames;
}

void writeJointFile(const std::filesystem::path& path, const Skeleton& skeleton, std::span<const JointSet> frames) {
  std::ofstream out = openForWrite(path);
  out << fileHeader(skeleton) << '\n';
  for (const JointSet& frame : frames) {
    if (frame.rows() != skeleton.jointCount()) {
      throwValidation("joint frame does not match skeleton '" + skeleton.name() + "'");
    }
    out << formatValues({frame.data(), static_cast<std::size_t>(frame.size())}) << '\n';
  }
}

}  // namespace kinedeep

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kinedeep/skeleton.h"
#include "kinedeep/types.h"

namespace kinedeep {

/// Comma-separated values with shortest round-trip formatting.
std::string formatValues(std::span<const double> values);
/// Parses a comma-separated line. `line_number` is used in error messages.
std::vector<double> parseValues(std::string_view text, int line_number);

/// Pose file: `# skeleton=<name>` header, then one pose of D values per line.
std::vector<PoseParams> readPoseFile(const std::filesystem::path& path, const Skeleton& skeleton);
void writePoseFile(const std::filesystem::path& path, const Skeleton& skeleton, std::span<const PoseParams> poses);

/// Joint file: same header, then 3*J values (x, y, z per joint) per line.
std::vector<JointSet> readJointFile(const std::filesystem::path& path, const Skeleton& skeleton);
void writeJointFile(const std::filesystem::path& path, const Skeleton& skeleton, std::span<const JointSet> frames);

std::string fileHeader(const Skeleton& skeleton);

}  // namespace kinedeep

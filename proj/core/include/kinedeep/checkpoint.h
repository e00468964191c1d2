#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "kinedeep/regressor.h"

namespace kinedeep {

inline constexpr int kCheckpointVersion = 1;

/// JSON checkpoint: format tag and version, network config and seed, mode,
/// scaling, SGD config, weights with velocity buffers, and history.
std::string checkpointToJson(const TrainRun& run);
TrainRun checkpointFromJson(std::string_view text);

void saveCheckpoint(const std::filesystem::path& path, const TrainRun& run);
TrainRun loadCheckpoint(const std::filesystem::path& path);

}  // namespace kinedeep

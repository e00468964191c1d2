#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "kinedeep/kinematics.h"
#include "kinedeep/skeleton.h"

namespace kinedeep::testing {

struct GridOptimum {
  double a = 0.0;
  double b = 0.0;
  double loss = std::numeric_limits<double>::infinity();
  double cellLoss = 0.0;  // largest loss change between neighboring cells near the optimum
};

// Dense 721 x 721 search over both angles of a 2-DOF planar chain.
inline GridOptimum gridSearch(const Skeleton& chain, const JointSet& target) {
  const int n = 721;
  const PoseParams& lower = chain.lowerBounds();
  const PoseParams& upper = chain.upperBounds();
  GridOptimum best;
  std::vector<double> losses(static_cast<std::size_t>(n * n));
  PoseParams theta(2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      theta << lower[0] + (upper[0] - lower[0]) * i / (n - 1), lower[1] + (upper[1] - lower[1]) * j / (n - 1);
      const JointSet joints = forwardKinematics(chain, theta);
      double loss = 0.0;
      for (int u : chain.evalSubset()) {
        loss += 0.5 * (joints.row(u) - target.row(u)).squaredNorm();
      }
      losses[static_cast<std::size_t>(i * n + j)] = loss;
      if (loss < best.loss) {
        best = {theta[0], theta[1], loss, 0.0};
      }
    }
  }
  const int bi = static_cast<int>(std::lround((best.a - lower[0]) / (upper[0] - lower[0]) * (n - 1)));
  const int bj = static_cast<int>(std::lround((best.b - lower[1]) / (upper[1] - lower[1]) * (n - 1)));
  for (int di = -1; di <= 1; ++di) {
    for (int dj = -1; dj <= 1; ++dj) {
      const int i = std::clamp(bi + di, 0, n - 1);
      const int j = std::clamp(bj + dj, 0, n - 1);
      best.cellLoss = std::max(best.cellLoss, losses[static_cast<std::size_t>(i * n + j)] - best.loss);
    }
  }
  return best;
}

}  // namespace kinedeep::testing

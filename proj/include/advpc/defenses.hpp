#pragma once

#include <cstdint>
#include <limits>

#include "advpc/core.hpp"

namespace advpc::defenses {

// Statistical outlier removal: drop points whose mean distance to their k
// nearest neighbours exceeds mean + alpha * stddev over the cloud.
struct SorConfig {
  std::size_t k = 2;
  double alpha = 1.1;
};

// Simple random sampling: discard drop_n points uniformly at random.
struct SrsConfig {
  std::size_t drop_n = 64;
  std::uint64_t seed = 0;
};

// alpha = +infinity disables the filter.
inline constexpr double kSorDisabled = std::numeric_limits<double>::infinity();

PointCloud sor(const PointCloud& cloud, const SorConfig& cfg);
PointCloud srs(const PointCloud& cloud, const SrsConfig& cfg);

// Mean distance of each point to its k nearest neighbours (self excluded).
std::vector<double> knn_mean_distances(const PointCloud& cloud, std::size_t k);

}  // namespace advpc::defenses

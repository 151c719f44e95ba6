#pragma once

#include <span>
#include <vector>

#include "advpc/core.hpp"

namespace advpc::metrics {

struct MetricConfig {
  double dcd_alpha = 40.0;
};

// One-directional forms: average / maximum over points of `adv` of the
// squared distance to the nearest point of `ref`. Not symmetrised.
double chamfer(const PointCloud& ref, const PointCloud& adv);
double hausdorff(const PointCloud& ref, const PointCloud& adv);

// Density-aware Chamfer distance in [0, 1], symmetric in its arguments.
// Uses the un-squared Euclidean distance in the exponent; the neighbour
// count of a selected point is how many points of the other cloud chose it.
double dcd(const PointCloud& a, const PointCloud& b, const MetricConfig& cfg = {});

// Index-aligned mean squared point displacement.
double mse_aligned(const PointCloud& a, const PointCloud& b);

// Percentage of positions where predicted != truth.
double asr(std::span<const int> predicted, std::span<const int> truth);

// Value and gradient with respect to the first argument. Nearest-neighbour
// assignments and neighbour counts are treated as constants, so the
// gradient is exact wherever those assignments are locally stable.
struct ValueGrad {
  double value = 0.0;
  std::vector<Vec3> grad;
};

ValueGrad dcd_with_grad(const PointCloud& x, const PointCloud& ref, const MetricConfig& cfg = {});
ValueGrad mse_with_grad(const PointCloud& x, const PointCloud& ref);

// Index of the nearest point of `to` for every point of `from`, ties to the
// lowest index.
std::vector<std::size_t> nearest_indices(const PointCloud& from, const PointCloud& to);

inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace advpc::metrics

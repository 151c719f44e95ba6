#include "advpc/defenses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "advpc/error.hpp"
#include "advpc/metrics.hpp"
#include "advpc/rng.hpp"

namespace advpc::defenses {

std::vector<double> knn_mean_distances(const PointCloud& cloud, std::size_t k) {
  const std::size_t n = cloud.size();
  std::vector<double> out(n);
  std::vector<double> row(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t m = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) row[m++] = std::sqrt(metrics::squared_distance(cloud.points[i], cloud.points[j]));
    }
    std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k), row.end());
    double sum = 0.0;
    for (std::size_t r = 0; r < k; ++r) sum += row[r];
    out[i] = sum / static_cast<double>(k);
  }
  return out;
}

PointCloud sor(const PointCloud& cloud, const SorConfig& cfg) {
  if (cfg.k < 1) throw Error("sor: k must be >= 1");
  if (!(cfg.alpha > 0.0)) throw Error("sor: alpha must be > 0");
  if (cloud.size() <= cfg.k) throw Error("sor: need more than k points");

  const auto d = knn_mean_distances(cloud, cfg.k);
  const double n = static_cast<double>(d.size());
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double var = 0.0;
  for (double v : d) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  const double threshold = std::isinf(cfg.alpha) ? cfg.alpha : mean + cfg.alpha * sd;

  PointCloud out;
  out.label = cloud.label;
  out.id = cloud.id;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] <= threshold) out.points.push_back(cloud.points[i]);
  }
  if (out.empty()) {
    const auto best = std::min_element(d.begin(), d.end()) - d.begin();
    out.points.push_back(cloud.points[static_cast<std::size_t>(best)]);
  }
  return out;
}

PointCloud srs(const PointCloud& cloud, const SrsConfig& cfg) {
  const std::size_t n = cloud.size();
  if (cfg.drop_n >= n) throw Error("srs: drop_n must be < number of points");
  if (cfg.drop_n == 0) return cloud;

  Rng rng(cfg.seed, 0x737273);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const std::size_t keep = n - cfg.drop_n;
  // partial Fisher-Yates: the first `keep` slots become a uniform subset
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep));

  PointCloud out;
  out.label = cloud.label;
  out.id = cloud.id;
  out.points.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) out.points.push_back(cloud.points[idx[i]]);
  return out;
}

}  // namespace advpc::defenses

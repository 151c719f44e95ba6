#include "advpc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "advpc/error.hpp"

namespace advpc::metrics {

namespace {

void require_nonempty(const PointCloud& a, const PointCloud& b, const char* op) {
  if (a.empty() || b.empty()) throw Error(std::string(op) + ": empty cloud");
}

// Squared distance from every point of `from` to its nearest point in `to`.
std::vector<double> nearest_sq(const PointCloud& from, const PointCloud& to) {
  std::vector<double> out(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : to.points) best = std::min(best, squared_distance(from.points[i], q));
    out[i] = best;
  }
  return out;
}

struct Assignment {
  std::vector<std::size_t> nn;
  std::vector<double> dist;     // un-squared
  std::vector<std::size_t> count;  // per point of `to`
};

Assignment assign(const PointCloud& from, const PointCloud& to) {
  Assignment a;
  a.nn = nearest_indices(from, to);
  a.dist.resize(from.size());
  a.count.assign(to.size(), 0);
  for (std::size_t i = 0; i < from.size(); ++i) {
    a.dist[i] = std::sqrt(squared_distance(from.points[i], to.points[a.nn[i]]));
    ++a.count[a.nn[i]];
  }
  return a;
}

double half_term(const Assignment& a, double alpha) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.nn.size(); ++i) {
    const double n = static_cast<double>(std::max<std::size_t>(1, a.count[a.nn[i]]));
    sum += 1.0 - std::exp(-alpha * a.dist[i]) / n;
  }
  return sum / static_cast<double>(a.nn.size());
}

}  // namespace

std::vector<std::size_t> nearest_indices(const PointCloud& from, const PointCloud& to) {
  std::vector<std::size_t> out(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t j = 0; j < to.size(); ++j) {
      const double d = squared_distance(from.points[i], to.points[j]);
      if (d < best) {
        best = d;
        arg = j;
      }
    }
    out[i] = arg;
  }
  return out;
}

double chamfer(const PointCloud& ref, const PointCloud& adv) {
  require_nonempty(ref, adv, "chamfer");
  const auto d = nearest_sq(adv, ref);
  double sum = 0.0;
  for (double v : d) sum += v;
  return sum / static_cast<double>(d.size());
}

double hausdorff(const PointCloud& ref, const PointCloud& adv) {
  require_nonempty(ref, adv, "hausdorff");
  const auto d = nearest_sq(adv, ref);
  return *std::max_element(d.begin(), d.end());
}

double dcd(const PointCloud& a, const PointCloud& b, const MetricConfig& cfg) {
  require_nonempty(a, b, "dcd");
  if (!(cfg.dcd_alpha > 0.0)) throw Error("dcd: alpha must be > 0");
  const Assignment ab = assign(a, b);
  const Assignment ba = assign(b, a);
  return 0.5 * (half_term(ab, cfg.dcd_alpha) + half_term(ba, cfg.dcd_alpha));
}

ValueGrad dcd_with_grad(const PointCloud& x, const PointCloud& ref, const MetricConfig& cfg) {
  require_nonempty(x, ref, "dcd");
  if (!(cfg.dcd_alpha > 0.0)) throw Error("dcd: alpha must be > 0");
  const double alpha = cfg.dcd_alpha;
  const Assignment xr = assign(x, ref);
  const Assignment rx = assign(ref, x);

  ValueGrad out;
  out.value = 0.5 * (half_term(xr, alpha) + half_term(rx, alpha));
  out.grad.assign(x.size(), Vec3{0.0, 0.0, 0.0});

  // x -> ref half: term depends on x_i through |x_i - ref_nn|.
  const double wx = 0.5 / static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = xr.dist[i];
    if (d == 0.0) continue;
    const double n = static_cast<double>(std::max<std::size_t>(1, xr.count[xr.nn[i]]));
    const double coef = wx * alpha * std::exp(-alpha * d) / (n * d);
    const auto& q = ref.points[xr.nn[i]];
    for (int k = 0; k < 3; ++k) out.grad[i][k] += coef * (x.points[i][k] - q[k]);
  }
  // ref -> x half: term depends on the selected x through |ref_j - x_nn|.
  const double wr = 0.5 / static_cast<double>(ref.size());
  for (std::size_t j = 0; j < ref.size(); ++j) {
    const double d = rx.dist[j];
    if (d == 0.0) continue;
    const std::size_t i = rx.nn[j];
    const double n = static_cast<double>(std::max<std::size_t>(1, rx.count[i]));
    const double coef = wr * alpha * std::exp(-alpha * d) / (n * d);
    for (int k = 0; k < 3; ++k) out.grad[i][k] += coef * (x.points[i][k] - ref.points[j][k]);
  }
  return out;
}

double mse_aligned(const PointCloud& a, const PointCloud& b) {
  if (a.size() != b.size()) throw Error("mse_aligned: size mismatch");
  if (a.empty()) throw Error("mse_aligned: empty cloud");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += squared_distance(a.points[i], b.points[i]);
  return sum / static_cast<double>(a.size());
}

ValueGrad mse_with_grad(const PointCloud& x, const PointCloud& ref) {
  ValueGrad out;
  out.value = mse_aligned(x, ref);
  out.grad.resize(x.size());
  const double scale = 2.0 / static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (int k = 0; k < 3; ++k) out.grad[i][k] = scale * (x.points[i][k] - ref.points[i][k]);
  }
  return out;
}

double asr(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw Error("asr: length mismatch");
  if (predicted.empty()) throw Error("asr: empty input");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) wrong += predicted[i] != truth[i] ? 1 : 0;
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(predicted.size());
}

}  // namespace advpc::metrics

#pragma once

// Independent reference implementations used by the tests. These are
// deliberately naive (explicit loops, no shared helpers with the library)
// so that agreement is evidence of correctness rather than of shared bugs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "advpc/core.hpp"

namespace oracle {

using advpc::PointCloud;
using advpc::Vec3;

inline PointCloud random_cloud(std::size_t n, std::mt19937_64& gen, double lo = -0.5,
                               double hi = 0.5) {
  std::uniform_real_distribution<double> u(lo, hi);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.points.push_back({u(gen), u(gen), u(gen)});
  return c;
}

inline double sq(const Vec3& a, const Vec3& b) {
  double s = 0.0;
  for (int k = 0; k < 3; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

inline double chamfer(const PointCloud& x, const PointCloud& xp) {
  double total = 0.0;
  for (const auto& y : xp.points) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : x.points) best = std::min(best, sq(p, y));
    total += best;
  }
  return total / static_cast<double>(xp.points.size());
}

inline double hausdorff(const PointCloud& x, const PointCloud& xp) {
  double worst = 0.0;
  for (const auto& y : xp.points) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : x.points) best = std::min(best, sq(p, y));
    worst = std::max(worst, best);
  }
  return worst;
}

// Index of the nearest point of `in` to `q`, first index on ties.
inline std::size_t nearest(const Vec3& q, const PointCloud& in) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < in.points.size(); ++j)
    if (sq(q, in.points[j]) < sq(q, in.points[best])) best = j;
  return best;
}

// One half of the density-aware distance: average over `from` of
// 1 - exp(-alpha * |p - nn(p)|) / count(nn(p)), where count(j) is how many
// points of `from` pick j as their nearest neighbour (at least 1).
inline double dcd_half(const PointCloud& from, const PointCloud& to, double alpha) {
  std::vector<std::size_t> pick(from.points.size());
  for (std::size_t i = 0; i < from.points.size(); ++i) pick[i] = nearest(from.points[i], to);
  double total = 0.0;
  for (std::size_t i = 0; i < from.points.size(); ++i) {
    std::size_t count = 0;
    for (std::size_t m = 0; m < from.points.size(); ++m)
      if (pick[m] == pick[i]) ++count;
    const double d = std::sqrt(sq(from.points[i], to.points[pick[i]]));
    total += 1.0 - std::exp(-alpha * d) / static_cast<double>(std::max<std::size_t>(count, 1));
  }
  return total / static_cast<double>(from.points.size());
}

inline double dcd(const PointCloud& x, const PointCloud& xp, double alpha) {
  return 0.5 * (dcd_half(x, xp, alpha) + dcd_half(xp, x, alpha));
}

inline double mse(const PointCloud& x, const PointCloud& xp) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.points.size(); ++i)
    for (int k = 0; k < 3; ++k) total += (x.points[i][k] - xp.points[i][k]) * (x.points[i][k] - xp.points[i][k]);
  return total / static_cast<double>(x.points.size());
}

// Central difference of f at x along coordinate (i, k).
inline double central_difference(const std::function<double(const PointCloud&)>& f,
                                 const PointCloud& x, std::size_t i, int k, double h = 1e-4) {
  PointCloud plus = x, minus = x;
  plus.points[i][k] += h;
  minus.points[i][k] -= h;
  return (f(plus) - f(minus)) / (2.0 * h);
}

inline double central_difference(const std::function<double(double)>& f, double x, double h = 1e-4) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Relative disagreement between forward and backward differences. A large
// value means a max/ReLU switch lies inside the stencil and the point is not
// a valid place to compare against an analytic derivative.
inline double kink_gap(const std::function<double(double)>& f, double x, double h = 1e-4) {
  const double f0 = f(x);
  const double fw = (f(x + h) - f0) / h;
  const double bw = (f0 - f(x - h)) / h;
  return std::abs(fw - bw) / std::max({std::abs(fw), std::abs(bw), 1e-6});
}

inline double kink_gap(const std::function<double(const PointCloud&)>& f, const PointCloud& x, std::size_t i,
                       int k, double h = 1e-4) {
  return kink_gap(
      [&](double v) {
        PointCloud y = x;
        y.points[i][k] = v;
        return f(y);
      },
      x.points[i][k], h);
}

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

// log |det A| by Gaussian elimination with partial pivoting.
inline double log_abs_det(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  double acc = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    acc += std::log(std::abs(a[c][c]));
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  return acc;
}

// Numerical Jacobian of f: R^n -> R^n by central differences.
inline std::vector<std::vector<double>> jacobian(
    const std::function<std::vector<double>(const std::vector<double>&)>& f,
    const std::vector<double>& x, double h = 1e-5) {
  const std::size_t n = x.size();
  std::vector<std::vector<double>> j(n, std::vector<double>(n));
  for (std::size_t c = 0; c < n; ++c) {
    auto plus = x, minus = x;
    plus[c] += h;
    minus[c] -= h;
    const auto fp = f(plus), fm = f(minus);
    for (std::size_t r = 0; r < n; ++r) j[r][c] = (fp[r] - fm[r]) / (2.0 * h);
  }
  return j;
}

inline double std_normal_log_density(const std::vector<double>& z) {
  double s = 0.0;
  for (double v : z) s += -0.5 * v * v - 0.5 * std::log(2.0 * M_PI);
  return s;
}

}  // namespace oracle

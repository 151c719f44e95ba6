#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace advpc {

using Vec3 = std::array<double, 3>;

// Ordered point sequence. Order matters only for index-aligned losses;
// set metrics ignore it.
struct PointCloud {
  std::vector<Vec3> points;
  std::optional<int> label;
  std::string id;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }

  // Geometry and label; the provenance id is not compared.
  bool operator==(const PointCloud& other) const {
    return points == other.points && label == other.label;
  }
};

struct BoundingBox {
  Vec3 lo;
  Vec3 hi;

  Vec3 center() const;
  double max_side() const;
};

BoundingBox bounding_box(const PointCloud& cloud);

bool all_finite(const PointCloud& cloud);

// Throws advpc::Error when the cloud is empty or holds NaN/Inf.
void check_valid(const PointCloud& cloud, std::string_view what = "cloud");

enum class ShapeKind { sphere = 0, cube = 1, cylinder = 2, torus = 3 };

inline constexpr int kNumShapeKinds = 4;

std::string_view to_string(ShapeKind kind);
ShapeKind parse_shape_kind(std::string_view name);

struct ShapeSpec {
  ShapeKind kind = ShapeKind::sphere;
  std::size_t n_points = 256;
  std::uint64_t seed = 0;
};

// Centre the bounding box at the origin and scale its longest side to 1.
// A cloud already within 1e-12 of that frame is returned unchanged, which
// makes the operation exactly idempotent.
PointCloud normalize_unit_cube(const PointCloud& cloud);

// Adds clip(N(0, sigma^2), -clip, clip) to every coordinate.
PointCloud jitter(const PointCloud& cloud, double sigma, double clip, std::uint64_t seed);

// Multiplies every point by one factor drawn from U[lo, hi].
PointCloud random_scale(const PointCloud& cloud, double lo, double hi, std::uint64_t seed);

// Samples the analytic surface of the primitive. Each primitive is sized so
// that its exact bounding box is the centred unit cube:
//   sphere   radius 0.5
//   cube     the six faces of [-0.5, 0.5]^3
//   cylinder radius 0.3, height 1 (lateral surface plus caps, area-weighted)
//   torus    major radius 0.35, minor radius 0.15, axis z
PointCloud generate_shape(const ShapeSpec& spec);

// Text format:
//   pcd <n> <label|->
//   x y z        (n lines, shortest round-trip decimal)
void save_cloud(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud load_cloud(const std::filesystem::path& path);

std::string format_cloud(const PointCloud& cloud);
PointCloud parse_cloud(std::string_view text);

inline constexpr std::string_view kCloudExtension = ".pcd.txt";

}  // namespace advpc

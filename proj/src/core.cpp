#include "advpc/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "advpc/error.hpp"
#include "advpc/rng.hpp"

namespace advpc {

Vec3 BoundingBox::center() const {
  return {(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0, (lo[2] + hi[2]) / 2.0};
}

double BoundingBox::max_side() const {
  return std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]});
}

BoundingBox bounding_box(const PointCloud& cloud) {
  if (cloud.empty()) throw Error("bounding_box: empty cloud");
  BoundingBox box{cloud.points.front(), cloud.points.front()};
  for (const auto& p : cloud.points) {
    for (int d = 0; d < 3; ++d) {
      box.lo[d] = std::min(box.lo[d], p[d]);
      box.hi[d] = std::max(box.hi[d], p[d]);
    }
  }
  return box;
}

bool all_finite(const PointCloud& cloud) {
  return std::all_of(cloud.points.begin(), cloud.points.end(), [](const Vec3& p) {
    return std::isfinite(p[0]) && std::isfinite(p[1]) && std::isfinite(p[2]);
  });
}

void check_valid(const PointCloud& cloud, std::string_view what) {
  if (cloud.empty()) throw Error(std::string(what) + ": empty cloud");
  if (!all_finite(cloud)) throw Error(std::string(what) + ": non-finite coordinate");
}

std::string_view to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::sphere: return "sphere";
    case ShapeKind::cube: return "cube";
    case ShapeKind::cylinder: return "cylinder";
    case ShapeKind::torus: return "torus";
  }
  return "unknown";
}

ShapeKind parse_shape_kind(std::string_view name) {
  for (int k = 0; k < kNumShapeKinds; ++k) {
    if (to_string(static_cast<ShapeKind>(k)) == name) return static_cast<ShapeKind>(k);
  }
  throw Error("unknown shape kind: " + std::string(name));
}

PointCloud normalize_unit_cube(const PointCloud& cloud) {
  check_valid(cloud, "normalize_unit_cube");
  const BoundingBox box = bounding_box(cloud);
  const double side = box.max_side();
  if (side <= 0.0) throw Error("normalize_unit_cube: zero extent");
  const Vec3 c = box.center();

  constexpr double kTol = 1e-12;
  if (std::abs(side - 1.0) <= kTol && std::abs(c[0]) <= kTol && std::abs(c[1]) <= kTol &&
      std::abs(c[2]) <= kTol) {
    return cloud;
  }

  PointCloud out = cloud;
  for (auto& p : out.points) {
    for (int d = 0; d < 3; ++d) p[d] = (p[d] - c[d]) / side;
  }
  return out;
}

PointCloud jitter(const PointCloud& cloud, double sigma, double clip, std::uint64_t seed) {
  if (!(sigma >= 0.0) || !(clip >= 0.0)) throw Error("jitter: sigma and clip must be >= 0");
  PointCloud out = cloud;
  if (sigma == 0.0) return out;
  Rng rng(seed, 0x6a697474);
  for (auto& p : out.points) {
    for (auto& v : p) v += std::clamp(sigma * rng.normal(), -clip, clip);
  }
  return out;
}

PointCloud random_scale(const PointCloud& cloud, double lo, double hi, std::uint64_t seed) {
  if (!(lo > 0.0) || !(hi >= lo)) throw Error("random_scale: need 0 < lo <= hi");
  Rng rng(seed, 0x7363616c);
  const double factor = lo == hi ? lo : rng.uniform(lo, hi);
  PointCloud out = cloud;
  for (auto& p : out.points) {
    for (auto& v : p) v *= factor;
  }
  return out;
}

namespace {

Vec3 sample_sphere(Rng& rng, double radius) {
  double x, y, z, norm;
  do {
    x = rng.normal();
    y = rng.normal();
    z = rng.normal();
    norm = std::sqrt(x * x + y * y + z * z);
  } while (norm < 1e-12);
  return {radius * x / norm, radius * y / norm, radius * z / norm};
}

Vec3 sample_cube(Rng& rng) {
  const auto face = rng.below(6);
  const int axis = static_cast<int>(face / 2);
  Vec3 p{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
  p[axis] = (face % 2 == 0) ? -0.5 : 0.5;
  return p;
}

Vec3 sample_cylinder(Rng& rng) {
  constexpr double r = 0.3;
  constexpr double h = 1.0;
  const double lateral = 2.0 * std::numbers::pi * r * h;
  const double caps = 2.0 * std::numbers::pi * r * r;
  const double theta = 2.0 * std::numbers::pi * rng.uniform();
  if (rng.uniform() * (lateral + caps) < lateral) {
    return {r * std::cos(theta), r * std::sin(theta), rng.uniform(-0.5, 0.5)};
  }
  const double rho = r * std::sqrt(rng.uniform());
  const double z = rng.uniform() < 0.5 ? -0.5 : 0.5;
  return {rho * std::cos(theta), rho * std::sin(theta), z};
}

Vec3 sample_torus(Rng& rng) {
  constexpr double major = 0.35;
  constexpr double minor = 0.15;
  // area element is proportional to (major + minor cos v)
  for (;;) {
    const double u = 2.0 * std::numbers::pi * rng.uniform();
    const double v = 2.0 * std::numbers::pi * rng.uniform();
    const double w = rng.uniform() * (major + minor);
    if (w <= major + minor * std::cos(v)) {
      const double ring = major + minor * std::cos(v);
      return {ring * std::cos(u), ring * std::sin(u), minor * std::sin(v)};
    }
  }
}

}  // namespace

PointCloud generate_shape(const ShapeSpec& spec) {
  if (spec.n_points < 8) throw Error("generate_shape: n_points must be >= 8");
  const int kind = static_cast<int>(spec.kind);
  if (kind < 0 || kind >= kNumShapeKinds) throw Error("generate_shape: unknown kind");

  Rng rng(spec.seed, 0x73686170 + static_cast<std::uint64_t>(kind));
  PointCloud cloud;
  cloud.points.reserve(spec.n_points);
  for (std::size_t i = 0; i < spec.n_points; ++i) {
    switch (spec.kind) {
      case ShapeKind::sphere: cloud.points.push_back(sample_sphere(rng, 0.5)); break;
      case ShapeKind::cube: cloud.points.push_back(sample_cube(rng)); break;
      case ShapeKind::cylinder: cloud.points.push_back(sample_cylinder(rng)); break;
      case ShapeKind::torus: cloud.points.push_back(sample_torus(rng)); break;
    }
  }
  cloud.label = kind;
  cloud.id = std::string(to_string(spec.kind)) + "-" + std::to_string(spec.seed);
  return cloud;
}

namespace {

void append_double(std::string& out, double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw Error("format_cloud: cannot format value");
  out.append(buf, end);
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

double parse_finite(std::string_view tok, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw ParseError("malformed number '" + std::string(tok) + "'", line);
  }
  if (!std::isfinite(v)) throw ParseError("non-finite coordinate", line);
  return v;
}

}  // namespace

std::string format_cloud(const PointCloud& cloud) {
  std::string out = "pcd " + std::to_string(cloud.size()) + " ";
  out += cloud.label ? std::to_string(*cloud.label) : std::string("-");
  out += '\n';
  for (const auto& p : cloud.points) {
    append_double(out, p[0]);
    out += ' ';
    append_double(out, p[1]);
    out += ' ';
    append_double(out, p[2]);
    out += '\n';
  }
  return out;
}

PointCloud parse_cloud(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  if (lines.empty()) throw ParseError("missing header", 1);

  const auto header = split_ws(lines[0]);
  if (header.size() != 3 || header[0] != "pcd") throw ParseError("expected 'pcd <n> <label>'", 1);
  std::size_t n = 0;
  {
    auto [ptr, ec] = std::from_chars(header[1].data(), header[1].data() + header[1].size(), n);
    if (ec != std::errc{} || ptr != header[1].data() + header[1].size() || n == 0) {
      throw ParseError("bad point count", 1);
    }
  }
  PointCloud cloud;
  if (header[2] != "-") {
    int label = 0;
    auto [ptr, ec] = std::from_chars(header[2].data(), header[2].data() + header[2].size(), label);
    if (ec != std::errc{} || ptr != header[2].data() + header[2].size()) {
      throw ParseError("bad label", 1);
    }
    cloud.label = label;
  }

  cloud.points.reserve(n);
  std::size_t line_no = 1;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    line_no = i + 1;
    const auto tokens = split_ws(lines[i]);
    if (tokens.empty()) continue;
    if (tokens.size() != 3) throw ParseError("expected 3 coordinates", line_no);
    if (cloud.points.size() == n) throw ParseError("more points than header declares", line_no);
    cloud.points.push_back({parse_finite(tokens[0], line_no), parse_finite(tokens[1], line_no),
                            parse_finite(tokens[2], line_no)});
  }
  if (cloud.points.size() != n) {
    throw ParseError("header declares " + std::to_string(n) + " points, found " +
                         std::to_string(cloud.points.size()),
                     line_no);
  }
  return cloud;
}

void save_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out << format_cloud(cloud);
  if (!out) throw Error("write failed: " + path.string());
}

PointCloud load_cloud(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open for reading: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  PointCloud cloud = parse_cloud(buf.str());
  auto stem = path.filename().string();
  if (stem.ends_with(kCloudExtension)) stem.resize(stem.size() - kCloudExtension.size());
  cloud.id = stem;
  return cloud;
}

}  // namespace advpc

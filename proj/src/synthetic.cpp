#include "salsanext/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "salsanext/config.hpp"
#include "salsanext/random.hpp"

namespace salsanext {

namespace {

constexpr double kDeg = M_PI / 180.0;
constexpr int kPlacementAttempts = 64;

void consider(std::optional<RayHit>& best, double t, ClassId label, float intensity, double max_range) {
  if (t <= 1e-9 || t > max_range) return;
  if (!best || t < best->distance) best = RayHit{t, label, intensity};
}

// Slab test in the box frame.
std::optional<double> intersect_box(const BoxPrimitive& b, const double d[3]) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double ox = -b.cx, oy = -b.cy;
  const double origin[3] = {c * ox + s * oy, -s * ox + c * oy, 0.0};
  const double dir[3] = {c * d[0] + s * d[1], -s * d[0] + c * d[1], d[2]};
  const double lo[3] = {-b.half_x, -b.half_y, b.z_min};
  const double hi[3] = {b.half_x, b.half_y, b.z_max};
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dir[a]) < 1e-15) {
      if (origin[a] < lo[a] || origin[a] > hi[a]) return std::nullopt;
      continue;
    }
    double t0 = (lo[a] - origin[a]) / dir[a];
    double t1 = (hi[a] - origin[a]) / dir[a];
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return std::nullopt;
  }
  if (t_far <= 0.0) return std::nullopt;
  return t_near > 0.0 ? t_near : t_far;
}

std::optional<double> intersect_pole(const PolePrimitive& p, const double d[3]) {
  std::optional<double> best;
  const double a = d[0] * d[0] + d[1] * d[1];
  if (a > 1e-15) {
    const double b = -2.0 * (d[0] * p.cx + d[1] * p.cy);
    const double c = p.cx * p.cx + p.cy * p.cy - p.radius * p.radius;
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double t = (-b - std::sqrt(disc)) / (2.0 * a);
      const double z = t * d[2];
      if (t > 0.0 && z >= p.z_min && z <= p.z_max) best = t;
    }
  }
  if (std::abs(d[2]) > 1e-15) {
    for (double cap : {p.z_max, p.z_min}) {
      const double t = cap / d[2];
      if (t <= 0.0) continue;
      const double x = t * d[0] - p.cx, y = t * d[1] - p.cy;
      if (x * x + y * y <= p.radius * p.radius && (!best || t < *best)) best = t;
    }
  }
  return best;
}

}  // namespace

double ScannerConfig::beam_pitch(int row) const {
  const double span = (fov_up_deg - fov_down_deg) * kDeg;
  return fov_up_deg * kDeg - (row + 0.5) * span / rows;
}

double ScannerConfig::beam_yaw(int col) const { return M_PI * (1.0 - 2.0 * (col + 0.5) / cols); }

SceneSpec SceneSpec::four_class() {
  SceneSpec spec;
  spec.classes = {
      {"ground", 0, PrimitiveKind::Ground, 1, 0, 0, 0, 0, 0, 0, 0.30f},
      {"building", 1, PrimitiveKind::Box, 4, 14.0, 30.0, 6.0, 14.0, 4.0, 9.0, 0.55f},
      {"car", 2, PrimitiveKind::Box, 6, 5.0, 18.0, 1.6, 4.2, 1.3, 1.7, 0.80f},
      {"pole", 3, PrimitiveKind::Pole, 3, 4.0, 14.0, 0.08, 0.15, 3.0, 6.0, 0.10f},
  };
  return spec;
}

SceneSpec SceneSpec::three_class() {
  SceneSpec spec = four_class();
  spec.classes.pop_back();
  return spec;
}

SceneSpec SceneSpec::parse(const std::string& text) {
  const auto kv = KeyValueConfig::parse(text);
  const std::string preset = kv.get_string("preset", "four_class");
  SceneSpec spec;
  if (preset == "four_class") spec = four_class();
  else if (preset == "three_class") spec = three_class();
  else throw Error(ErrorCode::InvalidSpec, "unknown scene preset '" + preset + "'");
  auto& sc = spec.scanner;
  sc.rows = kv.get_int("rows", sc.rows);
  sc.cols = kv.get_int("cols", sc.cols);
  sc.fov_up_deg = kv.get_double("fov_up_deg", sc.fov_up_deg);
  sc.fov_down_deg = kv.get_double("fov_down_deg", sc.fov_down_deg);
  sc.sensor_height = kv.get_double("sensor_height", sc.sensor_height);
  sc.max_range = kv.get_double("max_range", sc.max_range);
  sc.range_noise = kv.get_double("range_noise", sc.range_noise);
  sc.intensity_noise = kv.get_double("intensity_noise", sc.intensity_noise);
  static const char* scanner_keys[] = {"preset", "rows", "cols", "fov_up_deg", "fov_down_deg", "sensor_height",
                                       "max_range", "range_noise", "intensity_noise"};
  for (const auto& [key, value] : kv.values()) {
    if (std::find(std::begin(scanner_keys), std::end(scanner_keys), key) != std::end(scanner_keys)) continue;
    const auto dot = key.find('.');
    auto cls = std::find_if(spec.classes.begin(), spec.classes.end(),
                            [&](const PrimitiveSpec& c) { return dot != std::string::npos && c.name == key.substr(0, dot); });
    if (cls == spec.classes.end()) throw Error(ErrorCode::InvalidSpec, "unknown scene key '" + key + "'");
    const std::string field = key.substr(dot + 1);
    if (field == "count") cls->count = kv.get_int(key, cls->count);
    else if (field == "min_distance") cls->min_distance = kv.get_double(key, 0);
    else if (field == "max_distance") cls->max_distance = kv.get_double(key, 0);
    else if (field == "min_size") cls->min_size = kv.get_double(key, 0);
    else if (field == "max_size") cls->max_size = kv.get_double(key, 0);
    else if (field == "min_height") cls->min_height = kv.get_double(key, 0);
    else if (field == "max_height") cls->max_height = kv.get_double(key, 0);
    else if (field == "intensity") cls->intensity = static_cast<float>(kv.get_double(key, 0));
    else throw Error(ErrorCode::InvalidSpec, "unknown scene key '" + key + "'");
  }
  return spec;
}

SceneSpec SceneSpec::load(const std::string& path) { return parse(read_text_file(path)); }

std::optional<RayHit> cast_ray(const SceneGeometry& scene, const double d[3]) {
  std::optional<RayHit> best;
  const double max_range = scene.scanner.max_range;
  if (scene.ground && d[2] < -1e-12) consider(best, scene.ground->z / d[2], scene.ground->label, scene.ground->intensity, max_range);
  for (const auto& b : scene.boxes)
    if (auto t = intersect_box(b, d)) consider(best, *t, b.label, b.intensity, max_range);
  for (const auto& p : scene.poles)
    if (auto t = intersect_pole(p, d)) consider(best, *t, p.label, p.intensity, max_range);
  return best;
}

SceneGeometry instantiate_scene(std::uint64_t seed, const SceneSpec& spec) {
  if (spec.classes.empty()) throw Error(ErrorCode::InvalidSpec, "scene spec names no classes");
  if (spec.scanner.rows <= 0 || spec.scanner.cols <= 0 || spec.scanner.fov_up_deg <= spec.scanner.fov_down_deg)
    throw Error(ErrorCode::InvalidSpec, "scanner needs positive rows/cols and fov_up > fov_down");
  SceneGeometry scene;
  scene.scanner = spec.scanner;
  const double ground_z = -spec.scanner.sensor_height;
  Rng rng(seed);
  for (const auto& cls : spec.classes) {
    if (cls.count < 1) throw Error(ErrorCode::InvalidSpec, "class " + cls.name + " has no instances");
    if (cls.kind == PrimitiveKind::Ground) {
      scene.ground = GroundPlane{ground_z, cls.label, cls.intensity};
      continue;
    }
    for (int i = 0; i < cls.count; ++i) {
      const double dist = rng.uniform(cls.min_distance, cls.max_distance);
      const double azimuth = rng.uniform(-M_PI, M_PI);
      const double height = rng.uniform(cls.min_height, cls.max_height);
      const double cx = dist * std::cos(azimuth), cy = dist * std::sin(azimuth);
      if (cls.kind == PrimitiveKind::Box) {
        const double sx = rng.uniform(cls.min_size, cls.max_size);
        const double sy = rng.uniform(cls.min_size, cls.max_size);
        const double yaw = rng.uniform(-M_PI, M_PI);
        scene.boxes.push_back({cx, cy, yaw, 0.5 * sx, 0.5 * sy, ground_z, ground_z + height, cls.label, cls.intensity});
      } else {
        const double radius = rng.uniform(cls.min_size, cls.max_size);
        scene.poles.push_back({cx, cy, radius, ground_z, ground_z + height, cls.label, cls.intensity});
      }
    }
  }
  return scene;
}

LidarScan render_scene(const SceneGeometry& scene, std::uint64_t seed) {
  const auto& sc = scene.scanner;
  Rng rng(seed);
  LidarScan scan;
  scan.labels.emplace();
  for (int row = 0; row < sc.rows; ++row) {
    const double pitch = sc.beam_pitch(row);
    for (int col = 0; col < sc.cols; ++col) {
      const double yaw = sc.beam_yaw(col);
      const double d[3] = {std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw), std::sin(pitch)};
      const auto hit = cast_ray(scene, d);
      const double range_jitter = rng.normal() * sc.range_noise;
      const double intensity_jitter = rng.normal() * sc.intensity_noise;
      if (!hit) continue;
      const double r = std::max(hit->distance + range_jitter, 0.05);
      const double intensity = std::clamp(hit->intensity + intensity_jitter, 0.0, 1.0);
      scan.points.push_back({static_cast<float>(r * d[0]), static_cast<float>(r * d[1]),
                             static_cast<float>(r * d[2]), static_cast<float>(intensity)});
      scan.labels->push_back(hit->label);
    }
  }
  return scan;
}

SyntheticScene generate_synthetic_scene_with_geometry(std::uint64_t seed, const SceneSpec& spec) {
  if (spec.classes.empty()) throw Error(ErrorCode::InvalidSpec, "scene spec names no classes");
  for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
    const std::uint64_t placement_seed = attempt == 0 ? seed : derive_seed(seed, static_cast<std::uint64_t>(attempt));
    SyntheticScene out{instantiate_scene(placement_seed, spec), {}};
    out.scan = render_scene(out.geometry, derive_seed(placement_seed, 0x5EED));
    std::vector<bool> seen;
    for (ClassId l : *out.scan.labels) {
      if (l >= seen.size()) seen.resize(l + 1, false);
      seen[l] = true;
    }
    const bool all_present = std::all_of(spec.classes.begin(), spec.classes.end(), [&](const PrimitiveSpec& c) {
      return c.label < seen.size() && seen[c.label];
    });
    if (all_present) return out;
  }
  throw Error(ErrorCode::InvalidSpec, "could not place primitives so that every class is visible");
}

LidarScan generate_synthetic_scene(std::uint64_t seed, const SceneSpec& spec) {
  return generate_synthetic_scene_with_geometry(seed, spec).scan;
}

}  // namespace salsanext

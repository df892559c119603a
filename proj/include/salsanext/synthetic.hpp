#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "salsanext/pointcloud.hpp"

namespace salsanext {

/// Spinning scanner simulated by casting rows x cols beams from the origin.
struct ScannerConfig {
  int rows = 64;
  int cols = 512;
  double fov_up_deg = 3.0;
  double fov_down_deg = -25.0;
  double sensor_height = 1.73;  // ground plane sits at z = -sensor_height
  double max_range = 60.0;
  double range_noise = 0.01;    // meters, Gaussian along the beam
  double intensity_noise = 0.03;

  double beam_pitch(int row) const;  // radians
  double beam_yaw(int col) const;    // radians, matches the range-view column centers
};

enum class PrimitiveKind { Ground, Box, Pole };

/// Placement and size ranges for the instances of one class.
struct PrimitiveSpec {
  std::string name;
  ClassId label = 0;
  PrimitiveKind kind = PrimitiveKind::Ground;
  int count = 1;
  double min_distance = 5.0;
  double max_distance = 30.0;
  double min_size = 1.0;   // box footprint edge or pole radius
  double max_size = 2.0;
  double min_height = 1.0;
  double max_height = 2.0;
  float intensity = 0.5f;
};

struct SceneSpec {
  ScannerConfig scanner;
  std::vector<PrimitiveSpec> classes;

  /// Ground, buildings, cars and (rare) poles; labels 0..3.
  static SceneSpec four_class();
  /// Ground, buildings and cars; labels 0..2.
  static SceneSpec three_class();

  /// key=value text: `preset` (four_class | three_class), scanner keys
  /// (rows, cols, fov_up_deg, fov_down_deg, sensor_height, max_range,
  /// range_noise, intensity_noise) and per-class `<name>.<field>` overrides.
  static SceneSpec parse(const std::string& text);
  static SceneSpec load(const std::string& path);
};

struct GroundPlane {
  double z;
  ClassId label;
  float intensity;
};

struct BoxPrimitive {
  double cx, cy, yaw;
  double half_x, half_y;
  double z_min, z_max;
  ClassId label;
  float intensity;
};

struct PolePrimitive {
  double cx, cy, radius;
  double z_min, z_max;
  ClassId label;
  float intensity;
};

struct SceneGeometry {
  ScannerConfig scanner;
  std::optional<GroundPlane> ground;
  std::vector<BoxPrimitive> boxes;
  std::vector<PolePrimitive> poles;
};

struct RayHit {
  double distance;
  ClassId label;
  float intensity;
};

/// Nearest intersection of the ray origin + t*direction (unit) with t in (0, max_range].
std::optional<RayHit> cast_ray(const SceneGeometry& scene, const double direction[3]);

SceneGeometry instantiate_scene(std::uint64_t seed, const SceneSpec& spec);
LidarScan render_scene(const SceneGeometry& scene, std::uint64_t seed);

/// Deterministic labeled scan. Placement is redrawn (from derived seeds) until
/// every requested class is hit by at least one beam.
LidarScan generate_synthetic_scene(std::uint64_t seed, const SceneSpec& spec);

/// Scan together with the geometry it was rendered from.
struct SyntheticScene {
  SceneGeometry geometry;
  LidarScan scan;
};
SyntheticScene generate_synthetic_scene_with_geometry(std::uint64_t seed, const SceneSpec& spec);

}  // namespace salsanext

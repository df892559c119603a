#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "salsanext/error.hpp"

namespace salsanext {

using ClassId = std::uint32_t;

/// Sensor-frame point: x forward, z up, meters; intensity is unitless remission.
struct LidarPoint {
  float x = 0.f;
  float y = 0.f;
  float z = 0.f;
  float intensity = 0.f;

  double range() const;
  friend bool operator==(const LidarPoint&, const LidarPoint&) = default;
};

struct LidarScan {
  std::vector<LidarPoint> points;
  std::optional<std::vector<ClassId>> labels;

  std::size_t size() const { return points.size(); }
  bool labeled() const { return labels.has_value(); }
};

/// Raw dataset id -> contiguous training index, with class names.
class ClassMap {
 public:
  struct Entry {
    std::uint32_t raw_id;
    ClassId training_id;
    std::string name;
  };

  ClassMap() = default;
  explicit ClassMap(std::vector<Entry> entries);

  /// Text format, one `raw_id training_id name` per line; '#' starts a comment.
  static ClassMap parse(const std::string& text);
  static ClassMap load(const std::string& path);
  static ClassMap semantic_kitti();
  static ClassMap identity(ClassId num_classes);

  ClassId to_training(std::uint32_t raw_id) const;
  /// First raw id listed for a training index.
  std::uint32_t to_raw(ClassId training_id) const;
  ClassId num_classes() const;
  std::string name(ClassId training_id) const;
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
  std::map<std::uint32_t, ClassId> forward_;
  std::map<ClassId, std::uint32_t> inverse_;
};

// KITTI .bin: little-endian float32 (x, y, z, intensity) per point.
LidarScan read_kitti_scan(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_kitti_scan(const LidarScan& scan);

// SemanticKITTI .label: little-endian uint32 per point, lower 16 bits semantic id.
LidarScan read_kitti_labels(std::span<const std::uint8_t> bytes, const LidarScan& scan, const ClassMap& map);
std::vector<std::uint8_t> write_kitti_labels(std::span<const ClassId> labels, const ClassMap& map);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

struct AugmentConfig {
  double rotate_probability = 0.5;
  double translate_probability = 0.5;
  double flip_probability = 0.5;
  double drop_probability = 0.5;
  double rotation_min = -M_PI;  // radians about z
  double rotation_max = M_PI;
  double translation_max = 5.0;  // meters, uniform in [-t, t] per axis
  double drop_fraction_min = 0.0;
  double drop_fraction_max = 0.1;
};

/// Random rotation about z, translation, reflection y -> -y and point dropout,
/// each applied independently with its own probability. Requires labels.
LidarScan augment_scan(const LidarScan& scan, std::uint64_t seed, const AugmentConfig& config);

struct ClassWeights {
  std::vector<double> weights;           // alpha_i = 1/sqrt(f_i), 0 for absent classes
  std::vector<std::uint64_t> frequencies;  // f_i
};

ClassWeights compute_class_frequencies(std::span<const LidarScan> scans, ClassId num_classes);
ClassWeights class_weights_from_counts(std::vector<std::uint64_t> counts);

}  // namespace salsanext

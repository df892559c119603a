#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "salsanext/pointcloud.hpp"
#include "salsanext/tensor.hpp"

namespace salsanext {

struct ProjectionConfig {
  int width = 2048;
  int height = 64;
  double fov_up = 3.0 * M_PI / 180.0;     // radians, >= 0
  double fov_down = -25.0 * M_PI / 180.0;  // radians, <= 0

  static ProjectionConfig from_degrees(int width, int height, double up_deg, double down_deg);
  double fov() const { return std::abs(fov_down) + std::abs(fov_up); }
  void validate() const;
};

struct PixelCoord {
  int u = -1;  // column
  int v = -1;  // row
  bool valid() const { return u >= 0; }
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

inline constexpr float kEmptyRange = -1.0f;
inline constexpr int kRangeChannels = 5;
enum RangeChannel : int { kChannelX = 0, kChannelY, kChannelZ, kChannelIntensity, kChannelRange };

/// Spherical projection, floored then clamped to the image.
PixelCoord project_point(const LidarPoint& p, const ProjectionConfig& cfg);

/// Continuous (u, v) before discretization.
std::pair<double, double> project_point_continuous(const LidarPoint& p, const ProjectionConfig& cfg);

struct RangeImage {
  ProjectionConfig config;
  Tensor channels;                          // (5, h, w): x, y, z, intensity, range
  std::vector<std::uint8_t> valid;          // h*w, row-major
  std::vector<PixelCoord> pixel_of_point;   // invalid coord for degenerate points
  std::vector<std::int64_t> point_of_pixel;  // -1 for empty pixels

  int width() const { return config.width; }
  int height() const { return config.height; }
  std::size_t pixel_index(int u, int v) const { return static_cast<std::size_t>(v) * config.width + u; }
  bool is_valid(std::size_t pixel) const { return valid[pixel] != 0; }
  float range_at(std::size_t pixel) const { return channels[kChannelRange * plane() + static_cast<Index>(pixel)]; }
  Index plane() const { return Index(config.width) * config.height; }
  std::size_t valid_count() const;
  /// Points that lost their pixel to a nearer point.
  std::size_t collision_count() const;
  /// (1, 5, h, w) network input.
  Tensor network_input() const { return channels.reshaped({1, kRangeChannels, config.height, config.width}); }
};

/// Nearest point wins each pixel; equal ranges resolve to the lower point index.
RangeImage build_range_image(const LidarScan& scan, const ProjectionConfig& cfg);

/// Per-point labels read from a per-pixel label map (row-major h*w).
/// Points without a pixel receive fallback_label.
std::vector<ClassId> back_project(std::span<const ClassId> pixel_labels, const RangeImage& img,
                                  ClassId fallback_label = 0);

/// Label of the winning point on every valid pixel; empty pixels get 0.
std::vector<ClassId> pixel_labels_from_points(const RangeImage& img, std::span<const ClassId> point_labels);

}  // namespace salsanext

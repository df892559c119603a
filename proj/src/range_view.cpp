#include "salsanext/range_view.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace salsanext {

ProjectionConfig ProjectionConfig::from_degrees(int width, int height, double up_deg, double down_deg) {
  return {width, height, up_deg * M_PI / 180.0, down_deg * M_PI / 180.0};
}

void ProjectionConfig::validate() const {
  if (width <= 0 || height <= 0 || !(fov() > 0.0) || fov_up < 0.0 || fov_down > 0.0)
    throw Error(ErrorCode::Config, "projection needs w > 0, h > 0, f_up >= 0 >= f_down and f > 0");
}

std::pair<double, double> project_point_continuous(const LidarPoint& p, const ProjectionConfig& cfg) {
  const double r = p.range();
  if (!(r > 0.0) || !std::isfinite(r)) throw Error(ErrorCode::DegeneratePoint, "point has zero or non-finite range");
  const double yaw = std::atan2(static_cast<double>(p.y), static_cast<double>(p.x));
  const double pitch = std::asin(std::clamp(static_cast<double>(p.z) / r, -1.0, 1.0));
  const double u = 0.5 * (1.0 - yaw / M_PI) * cfg.width;
  const double v = (1.0 - (pitch + std::abs(cfg.fov_down)) / cfg.fov()) * cfg.height;
  return {u, v};
}

PixelCoord project_point(const LidarPoint& p, const ProjectionConfig& cfg) {
  const auto [u, v] = project_point_continuous(p, cfg);
  const auto discretize = [](double value, int extent) {
    const double f = std::floor(value);
    return static_cast<int>(std::clamp(f, 0.0, static_cast<double>(extent - 1)));
  };
  return {discretize(u, cfg.width), discretize(v, cfg.height)};
}

std::size_t RangeImage::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

std::size_t RangeImage::collision_count() const {
  std::size_t projected = 0;
  for (const auto& px : pixel_of_point) projected += px.valid();
  return projected - valid_count();
}

RangeImage build_range_image(const LidarScan& scan, const ProjectionConfig& cfg) {
  cfg.validate();
  if (scan.points.empty()) throw Error(ErrorCode::EmptyProjection, "scan has no points");
  RangeImage img;
  img.config = cfg;
  const Index plane = Index(cfg.width) * cfg.height;
  img.channels = Tensor({kRangeChannels, cfg.height, cfg.width});
  img.channels.array().segment(kChannelRange * plane, plane).setConstant(kEmptyRange);
  img.valid.assign(static_cast<std::size_t>(plane), 0);
  img.point_of_pixel.assign(static_cast<std::size_t>(plane), -1);
  img.pixel_of_point.assign(scan.points.size(), PixelCoord{});

  std::vector<double> ranges(scan.points.size());
  std::vector<std::size_t> order;
  order.reserve(scan.points.size());
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    ranges[i] = scan.points[i].range();
    if (!(ranges[i] > 0.0) || !std::isfinite(ranges[i])) continue;
    img.pixel_of_point[i] = project_point(scan.points[i], cfg);
    order.push_back(i);
  }
  if (order.empty()) throw Error(ErrorCode::EmptyProjection, "every point is degenerate");

  // Descending range; among equal ranges higher indices first so the lowest index is written last.
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ranges[a] != ranges[b] ? ranges[a] > ranges[b] : a > b;
  });
  for (std::size_t i : order) {
    const auto px = img.pixel_of_point[i];
    const std::size_t pixel = img.pixel_index(px.u, px.v);
    img.point_of_pixel[pixel] = static_cast<std::int64_t>(i);
    img.valid[pixel] = 1;
  }
  for (std::size_t pixel = 0; pixel < img.point_of_pixel.size(); ++pixel) {
    const auto k = img.point_of_pixel[pixel];
    if (k < 0) continue;
    const auto& p = scan.points[static_cast<std::size_t>(k)];
    const Index at = static_cast<Index>(pixel);
    img.channels[kChannelX * plane + at] = p.x;
    img.channels[kChannelY * plane + at] = p.y;
    img.channels[kChannelZ * plane + at] = p.z;
    img.channels[kChannelIntensity * plane + at] = p.intensity;
    img.channels[kChannelRange * plane + at] = static_cast<float>(ranges[static_cast<std::size_t>(k)]);
  }
  return img;
}

std::vector<ClassId> back_project(std::span<const ClassId> pixel_labels, const RangeImage& img, ClassId fallback_label) {
  if (pixel_labels.size() != static_cast<std::size_t>(img.plane()))
    throw Error(ErrorCode::Dimension, "label map has " + std::to_string(pixel_labels.size()) + " entries for a " +
                                          std::to_string(img.width()) + "x" + std::to_string(img.height()) + " image");
  std::vector<ClassId> out(img.pixel_of_point.size(), fallback_label);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto px = img.pixel_of_point[k];
    if (px.valid()) out[k] = pixel_labels[img.pixel_index(px.u, px.v)];
  }
  return out;
}

std::vector<ClassId> pixel_labels_from_points(const RangeImage& img, std::span<const ClassId> point_labels) {
  if (point_labels.size() != img.pixel_of_point.size())
    throw Error(ErrorCode::Dimension, "point label count does not match the projected scan");
  std::vector<ClassId> out(static_cast<std::size_t>(img.plane()), 0);
  for (std::size_t pixel = 0; pixel < out.size(); ++pixel)
    if (img.point_of_pixel[pixel] >= 0) out[pixel] = point_labels[static_cast<std::size_t>(img.point_of_pixel[pixel])];
  return out;
}

}  // namespace salsanext

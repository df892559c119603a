#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "salsanext/pointcloud.hpp"

namespace salsanext {

/// 8-bit image, 1 (gray) or 3 (RGB) channels, row-major interleaved.
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;
};

/// Writes PNG for ".png", binary PGM/PPM for ".pgm"/".ppm".
void write_image(const std::string& path, const Image8& image);

/// Min-max normalized grayscale, larger values lighter. Pixels with mask 0 are black.
Image8 grayscale(std::span<const float> values, int width, int height, std::span<const std::uint8_t> mask = {});

/// Fixed color table indexed by class; mask 0 pixels are black.
Image8 label_image(std::span<const ClassId> labels, int width, int height, std::span<const std::uint8_t> mask = {});
std::array<std::uint8_t, 3> class_color(ClassId c);

}  // namespace salsanext

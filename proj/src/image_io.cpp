#include "salsanext/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <limits>
#include <memory>

namespace salsanext {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

void write_png(const std::string& path, const Image8& image) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::Io, "libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::Io, "libpng failed writing " + path);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = std::size_t(image.width) * image.channels;
  for (int row = 0; row < image.height; ++row)
    png_write_row(png, const_cast<png_bytep>(image.pixels.data() + stride * row));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_pnm(const std::string& path, const Image8& image) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  std::fprintf(file.get(), "P%d\n%d %d\n255\n", image.channels == 3 ? 6 : 5, image.width, image.height);
  if (std::fwrite(image.pixels.data(), 1, image.pixels.size(), file.get()) != image.pixels.size())
    throw Error(ErrorCode::Io, "short write to " + path);
}

}  // namespace

void write_image(const std::string& path, const Image8& image) {
  if (image.width <= 0 || image.height <= 0 || (image.channels != 1 && image.channels != 3) ||
      image.pixels.size() != std::size_t(image.width) * image.height * image.channels)
    throw Error(ErrorCode::Dimension, "malformed image buffer for " + path);
  if (ends_with(path, ".png")) return write_png(path, image);
  if (ends_with(path, ".ppm") || ends_with(path, ".pgm")) return write_pnm(path, image);
  throw Error(ErrorCode::Config, "unsupported image extension: " + path);
}

Image8 grayscale(std::span<const float> values, int width, int height, std::span<const std::uint8_t> mask) {
  const std::size_t n = std::size_t(width) * height;
  if (values.size() != n || (!mask.empty() && mask.size() != n))
    throw Error(ErrorCode::Dimension, "grayscale input does not match the image size");
  float lo = std::numeric_limits<float>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask.empty() && !mask[i]) continue;
    lo = std::min(lo, values[i]);
    hi = std::max(hi, values[i]);
  }
  Image8 img{width, height, 1, std::vector<std::uint8_t>(n, 0)};
  if (!(hi >= lo)) return img;
  const float span = hi - lo;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask.empty() && !mask[i]) continue;
    const float t = span > 0.f ? (values[i] - lo) / span : 0.f;
    img.pixels[i] = static_cast<std::uint8_t>(std::clamp(t * 255.f + 0.5f, 0.f, 255.f));
  }
  return img;
}

std::array<std::uint8_t, 3> class_color(ClassId c) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 20> table = {{
      {128, 64, 128}, {70, 70, 70},   {0, 0, 142},    {153, 153, 153}, {107, 142, 35},
      {220, 20, 60},  {255, 0, 0},    {119, 11, 32},  {250, 170, 30},  {220, 220, 0},
      {152, 251, 152}, {70, 130, 180}, {0, 60, 100},  {0, 80, 100},    {0, 0, 230},
      {244, 35, 232}, {102, 102, 156}, {190, 153, 153}, {250, 170, 160}, {81, 0, 81},
  }};
  return table[c % table.size()];
}

Image8 label_image(std::span<const ClassId> labels, int width, int height, std::span<const std::uint8_t> mask) {
  const std::size_t n = std::size_t(width) * height;
  if (labels.size() != n || (!mask.empty() && mask.size() != n))
    throw Error(ErrorCode::Dimension, "label map does not match the image size");
  Image8 img{width, height, 3, std::vector<std::uint8_t>(n * 3, 0)};
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask.empty() && !mask[i]) continue;
    const auto rgb = class_color(labels[i]);
    std::copy(rgb.begin(), rgb.end(), img.pixels.begin() + static_cast<std::ptrdiff_t>(3 * i));
  }
  return img;
}

}  // namespace salsanext

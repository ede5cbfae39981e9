#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

namespace worldmesh {

// Row-major interleaved image, row 0 at the top.
template <class T>
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, int c, T fill = T{})
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  T& at(int x, int y, int c = 0) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  const T& at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
  bool operator==(const Image&) const = default;
};

using Image8 = Image<std::uint8_t>;
using ImageF = Image<double>;

// Per-pixel camera-space depth in meters; kNoHit marks pixels without geometry.
struct DepthMap {
  static constexpr double kNoHit = std::numeric_limits<double>::infinity();

  int width = 0;
  int height = 0;
  std::vector<double> values;

  DepthMap() = default;
  DepthMap(int w, int h, double fill = kNoHit) : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  bool hit(int x, int y) const { return std::isfinite(at(x, y)); }
  std::size_t hit_count() const;
  bool operator==(const DepthMap&) const = default;
};

ImageF to_float(const Image8& img);    // [0, 255] -> [0, 1]
Image8 to_8bit(const ImageF& img);     // clamped, rounded

std::vector<std::uint8_t> encode_png(const Image8& img);
Image8 decode_png(std::span<const std::uint8_t> bytes);
void write_png(const std::filesystem::path& path, const Image8& img);
Image8 read_png(const std::filesystem::path& path);
// 16-bit grayscale PNG, millimeter-quantized depth (0 = no hit).
void write_depth_preview_png(const std::filesystem::path& path, const DepthMap& depth);

// Portable float map, single channel, little endian. No-hit pixels are stored as 0.
std::vector<std::uint8_t> encode_pfm(const DepthMap& depth);
DepthMap decode_pfm(std::span<const std::uint8_t> bytes);
void write_pfm(const std::filesystem::path& path, const DepthMap& depth);
DepthMap read_pfm(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace worldmesh

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace morphfit {

/// Row-major interleaved float raster. Color data lives in [0, 1]; geometry planes
/// (positions, curvature, distances) are unbounded.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const { return data_.empty(); }

  double& at(int x, int y, int c) { return data_[index(x, y, c)]; }
  double at(int x, int y, int c) const { return data_[index(x, y, c)]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  /// Single channel copy.
  Image channel(int c) const;
  /// Overwrites channels [first, first + src.channels()) with src.
  void set_channels(int first, const Image& src);

  bool same_size(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// Binary single-channel plane, values 0/1.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height, std::uint8_t fill = 0)
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::uint8_t& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  bool test(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_ && at(x, y) != 0;
  }
  std::span<std::uint8_t> data() { return data_; }
  std::span<const std::uint8_t> data() const { return data_; }
  std::size_t count() const;
  Image to_image() const;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Bilinear sample at continuous pixel coordinates where pixel (x, y) has its center at
/// (x + 0.5, y + 0.5). Out-of-range taps clamp to the border.
void sample_bilinear(const Image& image, double px, double py, std::span<double> out);

/// Bilinear sample restricted to valid texels (weights renormalized). Returns false when no
/// tap is valid.
bool sample_bilinear_masked(const Image& image, const Mask& valid, double px, double py,
                            std::span<double> out);

/// Morphological erosion by a 3x3 square (pixels outside the image count as unset).
Mask erode3(const Mask& mask);

}  // namespace morphfit

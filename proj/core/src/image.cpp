#include "morphfit/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "morphfit/error.hpp"

namespace morphfit {

Image::Image(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 0 || height < 0 || channels < 0) {
    fail(ErrorCode::kInvalidArgument, "negative image dimensions");
  }
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

Image Image::channel(int c) const {
  if (c < 0 || c >= channels_) fail(ErrorCode::kInvalidArgument, "channel out of range");
  Image out(width_, height_, 1);
  for (std::size_t p = 0; p < pixel_count(); ++p) out.data_[p] = data_[p * channels_ + c];
  return out;
}

void Image::set_channels(int first, const Image& src) {
  if (!same_size(src) || first < 0 || first + src.channels_ > channels_) {
    fail(ErrorCode::kSizing, "channel block does not fit the destination image");
  }
  for (std::size_t p = 0; p < pixel_count(); ++p) {
    for (int c = 0; c < src.channels_; ++c) {
      data_[p * channels_ + first + c] = src.data_[p * src.channels_ + c];
    }
  }
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count_if(data_.begin(), data_.end(), [](auto v) { return v != 0; }));
}

Image Mask::to_image() const {
  Image out(width_, height_, 1);
  for (std::size_t p = 0; p < data_.size(); ++p) out.data()[p] = data_[p] != 0 ? 1.0 : 0.0;
  return out;
}

void sample_bilinear(const Image& image, double px, double py, std::span<double> out) {
  const int channels = image.channels();
  const double fx = px - 0.5;
  const double fy = py - 0.5;
  const double x0f = std::floor(fx);
  const double y0f = std::floor(fy);
  const double tx = fx - x0f;
  const double ty = fy - y0f;
  const auto clamp_x = [&](double v) { return static_cast<int>(std::clamp(v, 0.0, double(image.width() - 1))); };
  const auto clamp_y = [&](double v) { return static_cast<int>(std::clamp(v, 0.0, double(image.height() - 1))); };
  const int x0 = clamp_x(x0f);
  const int x1 = clamp_x(x0f + 1.0);
  const int y0 = clamp_y(y0f);
  const int y1 = clamp_y(y0f + 1.0);
  for (int c = 0; c < channels; ++c) {
    const double top = (1.0 - tx) * image.at(x0, y0, c) + tx * image.at(x1, y0, c);
    const double bottom = (1.0 - tx) * image.at(x0, y1, c) + tx * image.at(x1, y1, c);
    out[static_cast<std::size_t>(c)] = (1.0 - ty) * top + ty * bottom;
  }
}

bool sample_bilinear_masked(const Image& image, const Mask& valid, double px, double py,
                            std::span<double> out) {
  const int channels = image.channels();
  const double fx = px - 0.5;
  const double fy = py - 0.5;
  const double x0f = std::floor(fx);
  const double y0f = std::floor(fy);
  const double tx = fx - x0f;
  const double ty = fy - y0f;
  const int xs[2] = {static_cast<int>(std::clamp(x0f, 0.0, double(image.width() - 1))),
                     static_cast<int>(std::clamp(x0f + 1.0, 0.0, double(image.width() - 1)))};
  const int ys[2] = {static_cast<int>(std::clamp(y0f, 0.0, double(image.height() - 1))),
                     static_cast<int>(std::clamp(y0f + 1.0, 0.0, double(image.height() - 1)))};
  const double wx[2] = {1.0 - tx, tx};
  const double wy[2] = {1.0 - ty, ty};
  double total = 0.0;
  std::fill(out.begin(), out.begin() + channels, 0.0);
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < 2; ++i) {
      const double w = wx[i] * wy[j];
      if (w <= 0.0 || !valid.at(xs[i], ys[j])) continue;
      total += w;
      for (int c = 0; c < channels; ++c) out[static_cast<std::size_t>(c)] += w * image.at(xs[i], ys[j], c);
    }
  }
  if (!(total > 0.0)) return false;
  for (int c = 0; c < channels; ++c) out[static_cast<std::size_t>(c)] /= total;
  return true;
}

Mask erode3(const Mask& mask) {
  Mask out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      bool all = true;
      for (int dy = -1; dy <= 1 && all; ++dy) {
        for (int dx = -1; dx <= 1 && all; ++dx) all = mask.test(x + dx, y + dy);
      }
      out.at(x, y) = all ? 1 : 0;
    }
  }
  return out;
}

}  // namespace morphfit

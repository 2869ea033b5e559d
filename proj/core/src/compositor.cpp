#include "morphfit/compositor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "morphfit/error.hpp"
#include "morphfit/raster.hpp"

namespace morphfit {
namespace {

// Window of output pixel p covers source pixels p + [lo, hi].
struct Window {
  int lo;
  int hi;
};

Window window_for(int kernel) {
  const int anchor = kernel / 2;
  return {-anchor, kernel - 1 - anchor};
}

}  // namespace

void validate(const BlendConfig& config) {
  if (config.kernel < 1) fail(ErrorCode::kInvalidArgument, "dilation kernel must be >= 1");
  if (!(config.sigma2 > 0.0)) fail(ErrorCode::kInvalidArgument, "sigma2 must be > 0");
}

Mask dilate(const Mask& mask, int kernel) {
  if (kernel < 1) fail(ErrorCode::kInvalidArgument, "dilation kernel must be >= 1");
  const int w = mask.width();
  const int h = mask.height();
  const Window win = window_for(kernel);
  // Separable max: horizontal pass with a prefix count, then vertical.
  Mask horizontal(w, h);
  std::vector<int> prefix(static_cast<std::size_t>(std::max(w, h)) + 1);
  for (int y = 0; y < h; ++y) {
    prefix[0] = 0;
    for (int x = 0; x < w; ++x) prefix[x + 1] = prefix[x] + (mask.at(x, y) ? 1 : 0);
    for (int x = 0; x < w; ++x) {
      const int a = std::clamp(x + win.lo, 0, w);
      const int b = std::clamp(x + win.hi + 1, 0, w);
      horizontal.at(x, y) = prefix[b] - prefix[a] > 0 ? 1 : 0;
    }
  }
  Mask out(w, h);
  for (int x = 0; x < w; ++x) {
    prefix[0] = 0;
    for (int y = 0; y < h; ++y) prefix[y + 1] = prefix[y] + (horizontal.at(x, y) ? 1 : 0);
    for (int y = 0; y < h; ++y) {
      const int a = std::clamp(y + win.lo, 0, h);
      const int b = std::clamp(y + win.hi + 1, 0, h);
      out.at(x, y) = prefix[b] - prefix[a] > 0 ? 1 : 0;
    }
  }
  return out;
}

Mask margin(const Mask& mask, int kernel) {
  Mask out = dilate(mask, kernel);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.at(x, y)) out.at(x, y) = 0;
    }
  }
  return out;
}

DistancePlane vertex_distance_plane(const BilinearModel& model, const Shape& shape_src,
                                    const Shape& shape_tgt, const CameraPose& pose, int width,
                                    int height) {
  if (shape_src.vertex_count() != model.n_vertices() || shape_tgt.vertex_count() != model.n_vertices()) {
    fail(ErrorCode::kSizing, "shapes do not match the model topology");
  }
  const Eigen::MatrixXd d = (shape_tgt.matrix() - shape_src.matrix()).colwise().norm().transpose();
  const ScreenRaster raster = rasterize_screen(model, shape_tgt, pose, width, height);
  return {interpolate_screen(raster, model.topology(), d), raster.coverage};
}

double blend_alpha(double distance, const BlendConfig& config) {
  return std::exp(-distance * distance / config.sigma2);
}

Image blend(const Image& rendered, const Image& input, const Mask& coverage, const Image& distance,
            const BlendConfig& config) {
  validate(config);
  if (!rendered.same_size(input) || rendered.channels() != input.channels() ||
      coverage.width() != input.width() || coverage.height() != input.height() ||
      !distance.same_size(input) || distance.channels() != 1) {
    fail(ErrorCode::kSizing, "blend inputs differ in size");
  }
  const int w = input.width();
  const int h = input.height();
  const int ch = input.channels();
  Image out = input;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!coverage.at(x, y)) continue;
      const double alpha = blend_alpha(distance.at(x, y, 0), config);
      const double wi = config.alpha_weights_input ? alpha : 1.0 - alpha;
      for (int c = 0; c < ch; ++c) {
        out.at(x, y, c) = wi * input.at(x, y, c) + (1.0 - wi) * rendered.at(x, y, c);
      }
    }
  }

  const Mask ring = margin(coverage, config.kernel);
  const Window win = window_for(config.kernel);
  const int reach = std::max(-win.lo, win.hi);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!ring.at(x, y)) continue;
      // p is in the dilation of q when p - q lies in [lo, hi], i.e. q in p - [lo, hi].
      int best_cheb = std::numeric_limits<int>::max();
      int best_sq = std::numeric_limits<int>::max();
      int bx = -1;
      int by = -1;
      for (int qy = std::max(0, y - win.hi); qy <= std::min(h - 1, y - win.lo); ++qy) {
        for (int qx = std::max(0, x - win.hi); qx <= std::min(w - 1, x - win.lo); ++qx) {
          if (!coverage.at(qx, qy)) continue;
          const int dx = qx - x;
          const int dy = qy - y;
          const int cheb = std::max(std::abs(dx), std::abs(dy));
          const int sq = dx * dx + dy * dy;
          if (cheb < best_cheb || (cheb == best_cheb && sq < best_sq)) {
            best_cheb = cheb;
            best_sq = sq;
            bx = qx;
            by = qy;
          }
        }
      }
      if (bx < 0) continue;
      const double feather = 1.0 - static_cast<double>(best_cheb) / (reach + 1);
      for (int c = 0; c < ch; ++c) {
        out.at(x, y, c) = input.at(x, y, c) + feather * (out.at(bx, by, c) - input.at(bx, by, c));
      }
    }
  }
  return out;
}

}  // namespace morphfit

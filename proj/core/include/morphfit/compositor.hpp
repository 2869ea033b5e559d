#pragma once

#include "morphfit/fitting.hpp"
#include "morphfit/image.hpp"
#include "morphfit/model.hpp"

namespace morphfit {

struct BlendConfig {
  int kernel = 12;
  double sigma2 = 4.0;  // mm^2
  /// true: out = alpha * input + (1 - alpha) * rendered. false swaps the two roles.
  bool alpha_weights_input = true;
};

void validate(const BlendConfig& config);

/// Square structuring element of side `kernel` anchored at kernel / 2, so the window of pixel
/// p spans offsets [-kernel/2, kernel - 1 - kernel/2] on each axis.
Mask dilate(const Mask& mask, int kernel);

/// dilate(mask) with the mask itself removed.
Mask margin(const Mask& mask, int kernel);

struct DistancePlane {
  Image distance;  // mm, single channel, zero off coverage
  Mask coverage;
};

/// Per-vertex |x_tgt - x_src| interpolated over the target shape's screen projection.
DistancePlane vertex_distance_plane(const BilinearModel& model, const Shape& shape_src,
                                    const Shape& shape_tgt, const CameraPose& pose, int width,
                                    int height);

/// exp(-d^2 / sigma2)
double blend_alpha(double distance, const BlendConfig& config = {});

/// On coverage: alpha blend driven by the distance plane. On the margin: the input plus the nearest
/// coverage pixel's correction (blended minus input), weighted by 1 - chebyshev / (reach + 1).
/// Everywhere else the input is copied unchanged.
Image blend(const Image& rendered, const Image& input, const Mask& coverage,
            const Image& distance, const BlendConfig& config = {});

}  // namespace morphfit

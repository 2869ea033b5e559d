#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "morphfit/fitting.hpp"
#include "morphfit/image.hpp"
#include "morphfit/model.hpp"

namespace morphfit {

/// Pixel-center triangle scan with exact edge tests and a top-left fill rule.
///
/// Coordinates are in pixel units (pixel (x, y) has its center at (x + 0.5, y + 0.5), y down).
/// Coverage is decided on 32.32 fixed-point vertex coordinates with 128-bit edge functions, so
/// triangles sharing an edge never both cover a pixel and never leave a gap. `visit(x, y, b)`
/// receives barycentric weights b (for p0, p1, p2) computed in double precision from the
/// unsnapped coordinates. Zero-area and out-of-range triangles are skipped.
template <class Visit>
void scan_triangle(const Eigen::Vector2d& p0, const Eigen::Vector2d& p1, const Eigen::Vector2d& p2,
                   int width, int height, Visit&& visit);

struct Texture {
  Image image;
  Mask valid;

  int resolution() const { return image.width(); }
};

/// Triangle id and barycentrics for every covered pixel of a square UV raster.
struct UvLayout {
  int resolution = 0;
  std::vector<std::int32_t> triangle;  // -1 where uncovered
  std::vector<Eigen::Vector3d> bary;
  Mask coverage;
};

/// Throws kMalformed listing offending triangle pairs when UV triangles overlap.
UvLayout uv_layout(const BilinearModel& model, int resolution);

struct AttributeMap {
  Image values;
  Mask coverage;
};

/// Barycentric interpolation of per-vertex attributes (N x C) into the UV layout.
Image interpolate_layout(const UvLayout& layout, const std::vector<Triangle>& topology,
                         const Eigen::MatrixXd& attributes);
AttributeMap rasterize_uv(const BilinearModel& model, const Eigen::MatrixXd& attributes,
                          int resolution);

/// Image-space z-buffered coverage of the projected mesh. Back faces are culled.
struct ScreenRaster {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> triangle;  // -1 where uncovered
  std::vector<double> depth;           // camera-space z, +inf where uncovered
  std::vector<Eigen::Vector3d> bary;
  Mask coverage;
};

ScreenRaster rasterize_screen(const BilinearModel& model, const Shape& shape, const CameraPose& pose,
                              int width, int height);

/// Barycentric interpolation of per-vertex attributes (N x C) over the covered screen pixels.
Image interpolate_screen(const ScreenRaster& raster, const std::vector<Triangle>& topology,
                         const Eigen::MatrixXd& attributes);

/// True when the triangle's outward normal faces the viewer under `pose`.
bool front_facing(const Shape& shape, const Triangle& tri, const CameraPose& pose);

struct RenderResult {
  Image image;           // zero on background
  Mask coverage;         // rasterized and texture-valid pixels
  Image attributes;      // interpolated per-vertex attributes, when requested
  ScreenRaster raster;
};

/// Textured render with bilinear texture lookups at interpolated UVs. When
/// `vertex_attributes` (N x C) is given, it is interpolated into RenderResult::attributes.
RenderResult render(const Shape& shape, const Texture& texture, const CameraPose& pose,
                    const BilinearModel& model, int width, int height,
                    const Eigen::MatrixXd* vertex_attributes = nullptr);

/// UV-space texture sampled from `image` through the fitted shape and pose. Texels that are
/// back-facing, occluded (z-buffer test) or project outside the image are invalid.
Texture extract_texture(const Image& image, const Shape& shape, const CameraPose& pose,
                        const BilinearModel& model, int resolution);

// ---------------------------------------------------------------------------------------------

namespace detail {

using Fixed = std::int64_t;
__extension__ typedef __int128 Wide;
inline constexpr double kFixedScale = 4294967296.0;  // 2^32
inline constexpr double kMaxCoordinate = 1048576.0;  // 2^20 pixels

inline Fixed to_fixed(double v) { return static_cast<Fixed>(std::llround(v * kFixedScale)); }

inline Wide edge(Fixed ax, Fixed ay, Fixed bx, Fixed by, Fixed px, Fixed py) {
  return static_cast<Wide>(bx - ax) * (py - ay) - static_cast<Wide>(by - ay) * (px - ax);
}

/// Top-left rule for an edge a->b of a triangle with positive edge functions inside (y down).
inline bool top_left(Fixed ax, Fixed ay, Fixed bx, Fixed by) {
  const Fixed dx = bx - ax;
  const Fixed dy = by - ay;
  return dy < 0 || (dy == 0 && dx > 0);
}

}  // namespace detail

template <class Visit>
void scan_triangle(const Eigen::Vector2d& p0, const Eigen::Vector2d& p1, const Eigen::Vector2d& p2,
                   int width, int height, Visit&& visit) {
  using detail::Fixed;
  const Eigen::Vector2d* pts[3] = {&p0, &p1, &p2};
  for (const auto* p : pts) {
    if (!p->allFinite() || std::abs(p->x()) > detail::kMaxCoordinate ||
        std::abs(p->y()) > detail::kMaxCoordinate) {
      return;
    }
  }
  Fixed fx[3];
  Fixed fy[3];
  for (int i = 0; i < 3; ++i) {
    fx[i] = detail::to_fixed(pts[i]->x());
    fy[i] = detail::to_fixed(pts[i]->y());
  }
  const detail::Wide area = detail::edge(fx[0], fy[0], fx[1], fy[1], fx[2], fy[2]);
  if (area == 0) return;
  // order[k] is the original index of the k-th vertex after orientation normalisation.
  int order[3] = {0, 1, 2};
  if (area < 0) std::swap(order[1], order[2]);
  const Fixed ax = fx[order[0]], ay = fy[order[0]];
  const Fixed bx = fx[order[1]], by = fy[order[1]];
  const Fixed cx = fx[order[2]], cy = fy[order[2]];
  const bool tl_bc = detail::top_left(bx, by, cx, cy);
  const bool tl_ca = detail::top_left(cx, cy, ax, ay);
  const bool tl_ab = detail::top_left(ax, ay, bx, by);

  const double min_x = std::min({p0.x(), p1.x(), p2.x()});
  const double max_x = std::max({p0.x(), p1.x(), p2.x()});
  const double min_y = std::min({p0.y(), p1.y(), p2.y()});
  const double max_y = std::max({p0.y(), p1.y(), p2.y()});
  const int x_begin = std::max(0, static_cast<int>(std::floor(min_x - 0.5)));
  const int x_end = std::min(width - 1, static_cast<int>(std::ceil(max_x - 0.5)));
  const int y_begin = std::max(0, static_cast<int>(std::floor(min_y - 0.5)));
  const int y_end = std::min(height - 1, static_cast<int>(std::ceil(max_y - 0.5)));
  if (x_begin > x_end || y_begin > y_end) return;

  // Double-precision barycentrics from the original coordinates.
  const Eigen::Vector2d& a = *pts[order[0]];
  const Eigen::Vector2d& b = *pts[order[1]];
  const Eigen::Vector2d& c = *pts[order[2]];
  const double area_d = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());

  for (int y = y_begin; y <= y_end; ++y) {
    const double py = y + 0.5;
    const Fixed qy = detail::to_fixed(py);
    for (int x = x_begin; x <= x_end; ++x) {
      const double px = x + 0.5;
      const Fixed qx = detail::to_fixed(px);
      const detail::Wide w_a = detail::edge(bx, by, cx, cy, qx, qy);
      if (w_a < 0 || (w_a == 0 && !tl_bc)) continue;
      const detail::Wide w_b = detail::edge(cx, cy, ax, ay, qx, qy);
      if (w_b < 0 || (w_b == 0 && !tl_ca)) continue;
      const detail::Wide w_c = detail::edge(ax, ay, bx, by, qx, qy);
      if (w_c < 0 || (w_c == 0 && !tl_ab)) continue;

      const double l_a = ((c.x() - b.x()) * (py - b.y()) - (c.y() - b.y()) * (px - b.x())) / area_d;
      const double l_b = ((a.x() - c.x()) * (py - c.y()) - (a.y() - c.y()) * (px - c.x())) / area_d;
      const double l_c = 1.0 - l_a - l_b;
      Eigen::Vector3d bary;
      bary[order[0]] = l_a;
      bary[order[1]] = l_b;
      bary[order[2]] = l_c;
      visit(x, y, bary);
    }
  }
}

}  // namespace morphfit

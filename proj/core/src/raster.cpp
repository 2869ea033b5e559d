#include "morphfit/raster.hpp"

#include <limits>
#include <sstream>

#include "morphfit/error.hpp"
#include "morphfit/mesh.hpp"

namespace morphfit {
namespace {

void check_resolution(int resolution) {
  if (resolution < 1) fail(ErrorCode::kInvalidArgument, "resolution must be >= 1");
}

void check_shape(const BilinearModel& model, const Shape& shape) {
  if (shape.vertex_count() != model.n_vertices()) {
    fail(ErrorCode::kSizing, "shape has " + std::to_string(shape.vertex_count()) +
                                 " vertices, model has " + std::to_string(model.n_vertices()));
  }
}

// Anchored at the first corner so equal corner values interpolate to that value exactly.
double interpolate(const Eigen::Vector3d& b, double v0, double v1, double v2) {
  return v0 + b[1] * (v1 - v0) + b[2] * (v2 - v0);
}

Eigen::Vector2d uv_pixel(const Eigen::Vector2d& uv, int resolution) {
  return uv * static_cast<double>(resolution);
}

}  // namespace

UvLayout uv_layout(const BilinearModel& model, int resolution) {
  check_resolution(resolution);
  UvLayout layout;
  layout.resolution = resolution;
  const std::size_t pixels = static_cast<std::size_t>(resolution) * resolution;
  layout.triangle.assign(pixels, -1);
  layout.bary.assign(pixels, Eigen::Vector3d::Zero());
  layout.coverage = Mask(resolution, resolution);

  std::vector<std::pair<std::int32_t, std::int32_t>> overlaps;
  const auto& uv = model.uv();
  const auto& topo = model.topology();
  for (std::size_t t = 0; t < topo.size(); ++t) {
    const auto& tri = topo[t];
    const auto id = static_cast<std::int32_t>(t);
    scan_triangle(uv_pixel(uv[tri[0]], resolution), uv_pixel(uv[tri[1]], resolution),
                  uv_pixel(uv[tri[2]], resolution), resolution, resolution,
                  [&](int x, int y, const Eigen::Vector3d& b) {
                    const std::size_t p = static_cast<std::size_t>(y) * resolution + x;
                    if (layout.triangle[p] >= 0) {
                      const std::pair<std::int32_t, std::int32_t> pair{layout.triangle[p], id};
                      if (overlaps.empty() || overlaps.back() != pair) overlaps.push_back(pair);
                      return;
                    }
                    layout.triangle[p] = id;
                    layout.bary[p] = b;
                    layout.coverage.at(x, y) = 1;
                  });
  }
  if (!overlaps.empty()) {
    std::ostringstream msg;
    msg << "UV triangles overlap:";
    const std::size_t shown = std::min<std::size_t>(overlaps.size(), 16);
    for (std::size_t i = 0; i < shown; ++i) {
      msg << " (" << overlaps[i].first << ", " << overlaps[i].second << ")";
    }
    if (shown < overlaps.size()) msg << " and " << overlaps.size() - shown << " more";
    fail(ErrorCode::kMalformed, msg.str());
  }
  return layout;
}

Image interpolate_layout(const UvLayout& layout, const std::vector<Triangle>& topology,
                         const Eigen::MatrixXd& attributes) {
  const int res = layout.resolution;
  const int channels = static_cast<int>(attributes.cols());
  Image out(res, res, channels);
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * res + x;
      const auto t = layout.triangle[p];
      if (t < 0) continue;
      const auto& tri = topology[static_cast<std::size_t>(t)];
      const auto& b = layout.bary[p];
      for (int c = 0; c < channels; ++c) {
        out.at(x, y, c) = interpolate(b, attributes(tri[0], c), attributes(tri[1], c),
                                      attributes(tri[2], c));
      }
    }
  }
  return out;
}

AttributeMap rasterize_uv(const BilinearModel& model, const Eigen::MatrixXd& attributes,
                          int resolution) {
  if (attributes.rows() != model.n_vertices() || attributes.cols() < 1) {
    fail(ErrorCode::kSizing, "attributes must be N x C with N = " +
                                 std::to_string(model.n_vertices()));
  }
  const UvLayout layout = uv_layout(model, resolution);
  return {interpolate_layout(layout, model.topology(), attributes), layout.coverage};
}

Image interpolate_screen(const ScreenRaster& raster, const std::vector<Triangle>& topology,
                         const Eigen::MatrixXd& attributes) {
  const int channels = static_cast<int>(attributes.cols());
  Image out(raster.width, raster.height, channels);
  for (int y = 0; y < raster.height; ++y) {
    for (int x = 0; x < raster.width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * raster.width + x;
      const auto t = raster.triangle[p];
      if (t < 0) continue;
      const auto& tri = topology[static_cast<std::size_t>(t)];
      const auto& b = raster.bary[p];
      for (int c = 0; c < channels; ++c) {
        out.at(x, y, c) = interpolate(b, attributes(tri[0], c), attributes(tri[1], c),
                                      attributes(tri[2], c));
      }
    }
  }
  return out;
}

bool front_facing(const Shape& shape, const Triangle& tri, const CameraPose& pose) {
  const Eigen::Vector3d n = triangle_cross(shape, tri);
  return (pose.rotation * n).z() < 0.0;
}

ScreenRaster rasterize_screen(const BilinearModel& model, const Shape& shape, const CameraPose& pose,
                              int width, int height) {
  check_shape(model, shape);
  if (width < 1 || height < 1) fail(ErrorCode::kInvalidArgument, "image size must be positive");
  ScreenRaster r;
  r.width = width;
  r.height = height;
  const std::size_t pixels = static_cast<std::size_t>(width) * height;
  r.triangle.assign(pixels, -1);
  r.depth.assign(pixels, std::numeric_limits<double>::infinity());
  r.bary.assign(pixels, Eigen::Vector3d::Zero());
  r.coverage = Mask(width, height);

  const Eigen::Matrix2Xd screen = project(pose, shape);
  const Eigen::VectorXd z = (pose.rotation.row(2) * shape.matrix()).transpose();
  const auto& topo = model.topology();
  for (std::size_t t = 0; t < topo.size(); ++t) {
    const auto& tri = topo[t];
    if (!front_facing(shape, tri, pose)) continue;
    const auto id = static_cast<std::int32_t>(t);
    scan_triangle(screen.col(tri[0]), screen.col(tri[1]), screen.col(tri[2]), width, height,
                  [&](int x, int y, const Eigen::Vector3d& b) {
                    const std::size_t p = static_cast<std::size_t>(y) * width + x;
                    const double d = b[0] * z[tri[0]] + b[1] * z[tri[1]] + b[2] * z[tri[2]];
                    if (d < r.depth[p]) {
                      r.depth[p] = d;
                      r.triangle[p] = id;
                      r.bary[p] = b;
                      r.coverage.at(x, y) = 1;
                    }
                  });
  }
  return r;
}

RenderResult render(const Shape& shape, const Texture& texture, const CameraPose& pose,
                    const BilinearModel& model, int width, int height,
                    const Eigen::MatrixXd* vertex_attributes) {
  if (texture.image.empty() || texture.image.width() != texture.image.height() ||
      texture.valid.width() != texture.image.width() ||
      texture.valid.height() != texture.image.height()) {
    fail(ErrorCode::kInvalidArgument, "texture must be square with a matching validity mask");
  }
  if (vertex_attributes != nullptr && vertex_attributes->rows() != model.n_vertices()) {
    fail(ErrorCode::kSizing, "vertex attributes must have one row per vertex");
  }
  RenderResult out;
  out.raster = rasterize_screen(model, shape, pose, width, height);
  const int channels = texture.image.channels();
  const int res = texture.resolution();
  out.image = Image(width, height, channels);
  out.coverage = Mask(width, height);
  if (vertex_attributes != nullptr) {
    out.attributes = interpolate_screen(out.raster, model.topology(), *vertex_attributes);
  }
  const auto& uv = model.uv();
  const auto& topo = model.topology();
  std::vector<double> sample(static_cast<std::size_t>(channels));
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * width + x;
      const auto t = out.raster.triangle[p];
      if (t < 0) continue;
      const auto& tri = topo[static_cast<std::size_t>(t)];
      const auto& b = out.raster.bary[p];
      const Eigen::Vector2d st = (b[0] * uv[tri[0]] + b[1] * uv[tri[1]] + b[2] * uv[tri[2]]) * res;
      if (!sample_bilinear_masked(texture.image, texture.valid, st.x(), st.y(), sample)) continue;
      out.coverage.at(x, y) = 1;
      for (int c = 0; c < channels; ++c) out.image.at(x, y, c) = sample[static_cast<std::size_t>(c)];
    }
  }
  return out;
}

Texture extract_texture(const Image& image, const Shape& shape, const CameraPose& pose,
                        const BilinearModel& model, int resolution) {
  check_shape(model, shape);
  if (image.empty()) fail(ErrorCode::kInvalidArgument, "image is empty");
  const UvLayout layout = uv_layout(model, resolution);
  const ScreenRaster zbuf = rasterize_screen(model, shape, pose, image.width(), image.height());

  const Eigen::VectorXd z = (pose.rotation.row(2) * shape.matrix()).transpose();
  const double tolerance = 1e-3 * (z.size() > 0 ? z.maxCoeff() - z.minCoeff() : 0.0);
  const auto& topo = model.topology();
  std::vector<char> facing(topo.size());
  for (std::size_t t = 0; t < topo.size(); ++t) facing[t] = front_facing(shape, topo[t], pose);

  const int channels = image.channels();
  Texture tex{Image(resolution, resolution, channels), Mask(resolution, resolution)};
  std::vector<double> sample(static_cast<std::size_t>(channels));
  for (int y = 0; y < resolution; ++y) {
    for (int x = 0; x < resolution; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * resolution + x;
      const auto t = layout.triangle[p];
      if (t < 0 || !facing[static_cast<std::size_t>(t)]) continue;
      const auto& tri = topo[static_cast<std::size_t>(t)];
      const auto& b = layout.bary[p];
      const Eigen::Vector3d surface =
          b[0] * shape.vertex(tri[0]) + b[1] * shape.vertex(tri[1]) + b[2] * shape.vertex(tri[2]);
      const Eigen::Vector2d q =
          pose.scale * (pose.rotation.topRows<2>() * surface) + pose.translation;
      if (!(q.x() >= 0.0 && q.y() >= 0.0 && q.x() < image.width() && q.y() < image.height())) {
        continue;
      }
      const int px = static_cast<int>(q.x());
      const int py = static_cast<int>(q.y());
      const std::size_t zp = static_cast<std::size_t>(py) * image.width() + px;
      if (zbuf.triangle[zp] >= 0) {
        const double depth = pose.rotation.row(2).dot(surface);
        if (depth > zbuf.depth[zp] + tolerance) continue;
      }
      sample_bilinear(image, q.x(), q.y(), sample);
      for (int c = 0; c < channels; ++c) tex.image.at(x, y, c) = sample[static_cast<std::size_t>(c)];
      tex.valid.at(x, y) = 1;
    }
  }
  return tex;
}

}  // namespace morphfit

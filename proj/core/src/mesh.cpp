#include "morphfit/mesh.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include <Eigen/Geometry>

#include "morphfit/error.hpp"

namespace morphfit {

Eigen::Vector3d triangle_cross(const Shape& shape, const Triangle& tri) {
  const Eigen::Vector3d p0 = shape.vertex(tri[0]);
  return (shape.vertex(tri[1]) - p0).cross(shape.vertex(tri[2]) - p0);
}

double surface_area(std::span<const Triangle> topology, const Shape& shape) {
  double total = 0.0;
  for (const auto& tri : topology) total += 0.5 * triangle_cross(shape, tri).norm();
  return total;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> edge_list(std::span<const Triangle> topology) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  edges.reserve(topology.size() * 3);
  for (const auto& tri : topology) {
    for (int k = 0; k < 3; ++k) {
      auto a = tri[k];
      auto b = tri[(k + 1) % 3];
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      edges.emplace_back(a, b);
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::vector<std::vector<std::uint32_t>> vertex_neighbours(std::span<const Triangle> topology,
                                                          Index n_vertices) {
  std::vector<std::vector<std::uint32_t>> nbrs(static_cast<std::size_t>(n_vertices));
  for (const auto& [a, b] : edge_list(topology)) {
    nbrs[a].push_back(b);
    nbrs[b].push_back(a);
  }
  for (auto& n : nbrs) std::sort(n.begin(), n.end());
  return nbrs;
}

int connected_components(std::span<const Triangle> topology, Index n_vertices) {
  std::vector<std::uint32_t> parent(static_cast<std::size_t>(n_vertices));
  std::iota(parent.begin(), parent.end(), 0U);
  auto find = [&](std::uint32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (const auto& [a, b] : edge_list(topology)) {
    const auto ra = find(a);
    const auto rb = find(b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  int count = 0;
  for (std::uint32_t v = 0; v < parent.size(); ++v) count += find(v) == v ? 1 : 0;
  return count;
}

std::uint64_t mesh_hash(std::span<const Triangle> topology, Index n_vertices) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t value) {
    for (int byte = 0; byte < 8; ++byte) {
      h ^= (value >> (8 * byte)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(n_vertices));
  for (const auto& tri : topology) {
    for (auto v : tri) mix(v);
  }
  return h;
}

VertexAttributes vertex_attributes(std::span<const Triangle> topology, const Shape& shape) {
  const Index n = shape.vertex_count();
  VertexAttributes out;
  out.normals = Eigen::Matrix3Xd::Zero(3, n);
  out.one_ring_area = Eigen::VectorXd::Zero(n);
  out.curvature = Eigen::VectorXd::Zero(n);

  for (const auto& tri : topology) {
    const Eigen::Vector3d cross = triangle_cross(shape, tri);
    const double twice_area = cross.norm();
    if (!(twice_area > 0.0)) {
      ++out.degenerate_triangles;
      continue;
    }
    // The cross product is already area weighted.
    for (auto v : tri) {
      out.normals.col(v) += cross;
      out.one_ring_area[v] += 0.5 * twice_area;
    }
  }

  for (Index v = 0; v < n; ++v) {
    const double len = out.normals.col(v).norm();
    if (!(out.one_ring_area[v] > 0.0) || !(len > 0.0)) {
      fail(ErrorCode::kDegenerate,
           "vertex " + std::to_string(v) + " has no non-degenerate incident triangle");
    }
    out.normals.col(v) /= len;
  }

  const auto positions = shape.matrix();
  Eigen::Matrix3Xd laplacian = Eigen::Matrix3Xd::Zero(3, n);
  for (const auto& [a, b] : edge_list(topology)) {
    const Eigen::Vector3d d = positions.col(a) - positions.col(b);
    laplacian.col(a) += d;
    laplacian.col(b) -= d;
  }
  for (Index v = 0; v < n; ++v) {
    out.curvature[v] = out.normals.col(v).dot(laplacian.col(v)) / out.one_ring_area[v];
  }
  return out;
}

VertexAttributes vertex_attributes(const BilinearModel& model, const Shape& shape) {
  if (shape.vertex_count() != model.n_vertices()) {
    fail(ErrorCode::kSizing, "shape does not belong to this model");
  }
  return vertex_attributes(model.topology(), shape);
}

}  // namespace morphfit

#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "morphfit/model.hpp"

namespace morphfit {

struct VertexAttributes {
  Eigen::Matrix3Xd normals;       // unit length per column
  Eigen::VectorXd one_ring_area;  // mm^2
  Eigen::VectorXd curvature;      // mm^-1, positive on convex regions
  int degenerate_triangles = 0;   // skipped during accumulation
};

/// Area-weighted normals, one-ring areas and the signed uniform-Laplacian curvature proxy
/// dot(n_v, (L X)_v) / area_v where L = Degree - Adjacency of the edge graph.
VertexAttributes vertex_attributes(std::span<const Triangle> topology, const Shape& shape);
VertexAttributes vertex_attributes(const BilinearModel& model, const Shape& shape);

/// Unique undirected edges (i < j), sorted.
std::vector<std::pair<std::uint32_t, std::uint32_t>> edge_list(std::span<const Triangle> topology);

/// Sorted neighbour lists per vertex.
std::vector<std::vector<std::uint32_t>> vertex_neighbours(std::span<const Triangle> topology,
                                                          Index n_vertices);

/// Number of connected components of the edge graph (isolated vertices count as components).
int connected_components(std::span<const Triangle> topology, Index n_vertices);

/// FNV-1a hash over vertex count and triangle indices; identifies a topology.
std::uint64_t mesh_hash(std::span<const Triangle> topology, Index n_vertices);

/// Unnormalized triangle normal (cross product, length = 2 * area).
Eigen::Vector3d triangle_cross(const Shape& shape, const Triangle& tri);

/// Total surface area in mm^2.
double surface_area(std::span<const Triangle> topology, const Shape& shape);

}  // namespace morphfit

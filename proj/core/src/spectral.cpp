#include "morphfit/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "morphfit/error.hpp"
#include "morphfit/mesh.hpp"

namespace morphfit {
namespace {

void require_connected(std::span<const Triangle> topology, Index n_vertices) {
  const int components = connected_components(topology, n_vertices);
  if (components != 1) {
    fail(ErrorCode::kDegenerate,
         "mesh is disconnected (" + std::to_string(components) + " components)");
  }
}

SparseMatrix assemble(Index n, const std::vector<Eigen::Triplet<double>>& off_diagonal) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(off_diagonal.size() * 2 + static_cast<std::size_t>(n));
  Eigen::VectorXd degree = Eigen::VectorXd::Zero(n);
  for (const auto& t : off_diagonal) {
    triplets.emplace_back(t.row(), t.col(), -t.value());
    triplets.emplace_back(t.col(), t.row(), -t.value());
    degree[t.row()] += t.value();
    degree[t.col()] += t.value();
  }
  for (Index v = 0; v < n; ++v) triplets.emplace_back(v, v, degree[v]);
  SparseMatrix laplacian(n, n);
  laplacian.setFromTriplets(triplets.begin(), triplets.end());
  laplacian.makeCompressed();
  return laplacian;
}

}  // namespace

SparseMatrix graph_laplacian(std::span<const Triangle> topology, Index n_vertices) {
  require_connected(topology, n_vertices);
  std::vector<Eigen::Triplet<double>> edges;
  for (const auto& [a, b] : edge_list(topology)) edges.emplace_back(a, b, 1.0);
  return assemble(n_vertices, edges);
}

SparseMatrix cotangent_laplacian(std::span<const Triangle> topology, const Shape& shape) {
  const Index n = shape.vertex_count();
  require_connected(topology, n);
  std::vector<Eigen::Triplet<double>> weights;
  for (const auto& tri : topology) {
    for (int k = 0; k < 3; ++k) {
      const auto i = tri[k];
      const auto j = tri[(k + 1) % 3];
      const auto o = tri[(k + 2) % 3];
      const Eigen::Vector3d u = shape.vertex(i) - shape.vertex(o);
      const Eigen::Vector3d v = shape.vertex(j) - shape.vertex(o);
      const double sin_angle = u.cross(v).norm();
      if (!(sin_angle > 0.0)) continue;
      weights.emplace_back(std::min(i, j), std::max(i, j), 0.5 * u.dot(v) / sin_angle);
    }
  }
  return assemble(n, weights);
}

SpectralBasis eigenbasis(const SparseMatrix& laplacian, Index k, std::uint64_t mesh_hash) {
  const Index n = laplacian.rows();
  if (laplacian.cols() != n) fail(ErrorCode::kSizing, "Laplacian must be square");
  if (k < 1 || k > n - 1) {
    fail(ErrorCode::kInvalidArgument,
         "k must lie in [1, N-1] (k=" + std::to_string(k) + ", N=" + std::to_string(n) + ")");
  }
  const Eigen::MatrixXd dense(laplacian);
  // Tridiagonalization + implicit QL; deterministic for a given input and build.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense);
  if (solver.info() != Eigen::Success) fail(ErrorCode::kNumerical, "eigensolver did not converge");

  const Eigen::VectorXd& values = solver.eigenvalues();
  const double zero_tol = 1e-9 * std::max(1.0, std::abs(values[n - 1]));
  Index zeros = 0;
  while (zeros < n && std::abs(values[zeros]) <= zero_tol) ++zeros;
  if (zeros == 0) fail(ErrorCode::kDegenerate, "Laplacian has no zero eigenvalue");
  if (zeros > 1) {
    fail(ErrorCode::kDegenerate,
         "Laplacian has " + std::to_string(zeros) + " zero eigenvalues (disconnected graph)");
  }

  SpectralBasis basis;
  basis.mesh_hash = mesh_hash;
  basis.eigenvalues = values.segment(1, k);
  basis.vectors = solver.eigenvectors().middleCols(1, k);
  for (Index c = 0; c < k; ++c) {
    auto col = basis.vectors.col(c);
    for (Index r = 0; r < n; ++r) {
      if (std::abs(col[r]) > 1e-12) {
        if (col[r] < 0.0) col = -col;
        break;
      }
    }
  }
  return basis;
}

SpectralBasis mesh_eigenbasis(const BilinearModel& model, Index k, LaplacianWeights weights) {
  const auto hash = mesh_hash(model.topology(), model.n_vertices());
  if (weights == LaplacianWeights::kCombinatorial) {
    return eigenbasis(graph_laplacian(model.topology(), model.n_vertices()), k, hash);
  }
  // Cotangent weights are evaluated on the reference face.
  const Shape reference = contract_bilinear(model, model.reference_identity_vector(),
                                            model.neutral_expression());
  return eigenbasis(cotangent_laplacian(model.topology(), reference), k, hash);
}

SpectralCoeffs encode(const SpectralBasis& basis, const DisplacementField& field) {
  if (field.vectors.cols() != basis.n_vertices()) {
    fail(ErrorCode::kSizing, "displacement field has " + std::to_string(field.vectors.cols()) +
                                 " vertices, basis has " + std::to_string(basis.n_vertices()));
  }
  if (basis.mesh_hash != 0 && field.mesh_hash != 0 && basis.mesh_hash != field.mesh_hash) {
    fail(ErrorCode::kMalformed, "displacement field topology does not match the spectral basis");
  }
  const Index k = basis.k();
  SpectralCoeffs coeffs;
  coeffs.values.resize(3 * k);
  for (Index axis = 0; axis < 3; ++axis) {
    coeffs.values.segment(axis * k, k).noalias() =
        basis.vectors.transpose() * field.vectors.row(axis).transpose();
  }
  return coeffs;
}

DisplacementField decode(const SpectralBasis& basis, const SpectralCoeffs& coeffs) {
  const Index k = basis.k();
  if (coeffs.values.size() != 3 * k) {
    fail(ErrorCode::kSizing, "expected " + std::to_string(3 * k) + " spectral coefficients, got " +
                                 std::to_string(coeffs.values.size()));
  }
  DisplacementField field;
  field.mesh_hash = basis.mesh_hash;
  field.vectors.resize(3, basis.n_vertices());
  for (Index axis = 0; axis < 3; ++axis) {
    field.vectors.row(axis).noalias() =
        (basis.vectors * coeffs.values.segment(axis * k, k)).transpose();
  }
  return field;
}

SpectralBasis truncate(const SpectralBasis& basis, Index k) {
  if (k < 1 || k > basis.k()) fail(ErrorCode::kInvalidArgument, "truncation k out of range");
  SpectralBasis out;
  out.mesh_hash = basis.mesh_hash;
  out.eigenvalues = basis.eigenvalues.head(k);
  out.vectors = basis.vectors.leftCols(k);
  return out;
}

}  // namespace morphfit

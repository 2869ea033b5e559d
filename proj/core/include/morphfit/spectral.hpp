#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "morphfit/model.hpp"

namespace morphfit {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class LaplacianWeights {
  kCombinatorial,  // Degree - Adjacency
  kCotangent,      // symmetric cotangent weights (needs positions)
};

/// Combinatorial graph Laplacian L = D - A of the mesh edge graph. Throws kDegenerate on a
/// disconnected mesh, naming the component count.
SparseMatrix graph_laplacian(std::span<const Triangle> topology, Index n_vertices);

/// Cotangent-weighted Laplacian (weights (cot a + cot b) / 2 per edge), same sign convention.
SparseMatrix cotangent_laplacian(std::span<const Triangle> topology, const Shape& shape);

/// Low end of the Laplacian spectrum with the zero eigenpair removed.
struct SpectralBasis {
  Eigen::VectorXd eigenvalues;  // ascending, > 0, length k
  Eigen::MatrixXd vectors;      // N x k, orthonormal columns
  std::uint64_t mesh_hash = 0;

  Index k() const { return vectors.cols(); }
  Index n_vertices() const { return vectors.rows(); }
};

/// The k smallest strictly positive eigenpairs of a symmetric Laplacian (dense solve).
/// Sign convention: the first entry with |x| > 1e-12 of each vector is positive.
/// Requires 1 <= k <= N - 1; more than one numerically-zero eigenvalue throws kDegenerate.
SpectralBasis eigenbasis(const SparseMatrix& laplacian, Index k, std::uint64_t mesh_hash = 0);

/// graph_laplacian + eigenbasis, tagged with the topology hash.
SpectralBasis mesh_eigenbasis(const BilinearModel& model, Index k,
                              LaplacianWeights weights = LaplacianWeights::kCombinatorial);

struct DisplacementField {
  Eigen::Matrix3Xd vectors;  // mm, one column per vertex
  std::uint64_t mesh_hash = 0;
};

/// Three axis blocks of k coefficients: [x_0..x_{k-1}, y_0.., z_0..].
struct SpectralCoeffs {
  Eigen::VectorXd values;
};

/// Per axis: c = V^T f. Throws kSizing on size mismatch, kMalformed on a mesh hash mismatch
/// (a zero hash on either side skips the check).
SpectralCoeffs encode(const SpectralBasis& basis, const DisplacementField& field);
/// Per axis: f = V c.
DisplacementField decode(const SpectralBasis& basis, const SpectralCoeffs& coeffs);

/// Keeps only the first `k` eigenpairs.
SpectralBasis truncate(const SpectralBasis& basis, Index k);

}  // namespace morphfit

#include <gtest/gtest.h>

#include <numbers>

#include "morphfit/error.hpp"
#include "morphfit/mesh.hpp"
#include "morphfit/spectral.hpp"
#include "morphfit/synthkit.hpp"
#include "test_support.hpp"

namespace morphfit {
namespace {

SparseMatrix cycle_laplacian(int n) {
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < n; ++i) {
    t.emplace_back(i, i, 2.0);
    t.emplace_back(i, (i + 1) % n, -1.0);
    t.emplace_back((i + 1) % n, i, -1.0);
  }
  SparseMatrix L(n, n);
  L.setFromTriplets(t.begin(), t.end());
  return L;
}

void expect_cycle_spectrum(int n) {
  const SpectralBasis basis = eigenbasis(cycle_laplacian(n), n - 1);
  std::vector<double> expected;
  for (int k = 1; k < n; ++k) expected.push_back(2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * k / n));
  std::sort(expected.begin(), expected.end());
  ASSERT_EQ(basis.k(), n - 1);
  for (int k = 0; k < n - 1; ++k) EXPECT_NEAR(basis.eigenvalues[k], expected[static_cast<std::size_t>(k)], 1e-10);
}

TEST(Eigenbasis, CycleGraphsMatchAnalyticSpectra) {
  expect_cycle_spectrum(6);  // 1, 1, 3, 3, 4
  expect_cycle_spectrum(4);  // 2, 2, 4
  expect_cycle_spectrum(9);
}

TEST(Eigenbasis, MeshSpectrumResidualAndOrthonormality) {
  const auto& kit = testing::default_kit();
  const SparseMatrix L = graph_laplacian(kit.model.topology(), kit.model.n_vertices());
  const SpectralBasis basis = mesh_eigenbasis(kit.model, 100);
  ASSERT_EQ(basis.k(), 100);
  ASSERT_EQ(basis.n_vertices(), kit.model.n_vertices());
  const Eigen::MatrixXd residual = L * basis.vectors - basis.vectors * basis.eigenvalues.asDiagonal();
  EXPECT_LT(residual.lpNorm<Eigen::Infinity>(), 1e-8);
  const Eigen::MatrixXd gram = basis.vectors.transpose() * basis.vectors;
  EXPECT_LT((gram - Eigen::MatrixXd::Identity(100, 100)).lpNorm<Eigen::Infinity>(), 1e-8);
  EXPECT_GT(basis.eigenvalues[0], 1e-10);
  for (Index i = 1; i < basis.k(); ++i) EXPECT_GE(basis.eigenvalues[i], basis.eigenvalues[i - 1]);
  EXPECT_EQ(basis.mesh_hash, mesh_hash(kit.model.topology(), kit.model.n_vertices()));
  // First significant entry of each vector is positive.
  for (Index c = 0; c < basis.k(); ++c) {
    for (Index r = 0; r < basis.n_vertices(); ++r) {
      if (std::abs(basis.vectors(r, c)) > 1e-12) {
        EXPECT_GT(basis.vectors(r, c), 0.0);
        break;
      }
    }
  }
}

TEST(Eigenbasis, KRangeIsEnforced) {
  const SparseMatrix L = cycle_laplacian(5);
  EXPECT_THROW(eigenbasis(L, 0), Error);
  EXPECT_THROW(eigenbasis(L, 5), Error);
  EXPECT_NO_THROW(eigenbasis(L, 4));
}

TEST(GraphLaplacian, IsDegreeMinusAdjacency) {
  const BilinearModel m = testing::grid_model(4, 5, 1, 1, 1);
  const SparseMatrix L = graph_laplacian(m.topology(), m.n_vertices());
  const Eigen::MatrixXd dense(L);
  EXPECT_TRUE(dense.isApprox(dense.transpose()));
  EXPECT_LT((dense * Eigen::VectorXd::Ones(m.n_vertices())).norm(), 1e-14);
  const auto nb = vertex_neighbours(m.topology(), m.n_vertices());
  for (Index v = 0; v < m.n_vertices(); ++v) {
    EXPECT_EQ(dense(v, v), static_cast<double>(nb[static_cast<std::size_t>(v)].size()));
  }
}

TEST(GraphLaplacian, DisconnectedMeshFails) {
  const std::vector<Triangle> topo{{0, 1, 2}, {3, 4, 5}};
  try {
    graph_laplacian(topo, 6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerate);
    EXPECT_NE(std::string(e.what()).find('2'), std::string::npos);
  }
}

TEST(CotangentLaplacian, AnnihilatesLinearFunctionsOnFlatInterior) {
  const BilinearModel m = testing::grid_model(6, 6, 1, 1, 1);
  const Shape flat = contract_bilinear(m, m.reference_identity_vector(), m.neutral_expression());
  const SparseMatrix L = cotangent_laplacian(m.topology(), flat);
  Eigen::VectorXd f(m.n_vertices());
  for (Index v = 0; v < m.n_vertices(); ++v) f[v] = 2.0 * flat.vertex(v).x() - 3.0 * flat.vertex(v).y() + 1.0;
  const Eigen::VectorXd lf = L * f;
  for (int r = 1; r < 5; ++r) {
    for (int c = 1; c < 5; ++c) EXPECT_NEAR(lf[r * 6 + c], 0.0, 1e-12);
  }
  EXPECT_LT((L * Eigen::VectorXd::Ones(m.n_vertices())).norm(), 1e-12);
}

TEST(SpectralCoding, BandLimitedFieldsReconstruct) {
  const auto& kit = testing::default_kit();
  const SpectralBasis basis = truncate(kit.spectrum, 100);
  Rng rng(4);
  DisplacementField field;
  field.vectors = Eigen::Matrix3Xd::Zero(3, kit.model.n_vertices());
  for (Index j = 0; j < 60; ++j) {
    field.vectors += Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) * kit.spectrum.vectors.col(j).transpose();
  }
  const DisplacementField back = decode(basis, encode(basis, field));
  EXPECT_LT((back.vectors - field.vectors).norm() / field.vectors.norm(), 1e-10);

  // The synthetic nonlinear deformation is band-limited by construction.
  for (std::uint64_t s = 0; s < 5; ++s) {
    Rng crng(100 + s);
    const Coefficients c = sample_coefficients(kit.spec, crng);
    const DisplacementField g = kit.nonlinear.evaluate(c.identity, c.expression);
    const DisplacementField r = decode(basis, encode(basis, g));
    EXPECT_LT((r.vectors - g.vectors).norm() / g.vectors.norm(), 0.05);
  }
}

TEST(SpectralCoding, HashAndSizeChecks) {
  const auto& kit = testing::default_kit();
  const SpectralBasis basis = truncate(kit.spectrum, 10);
  DisplacementField field{Eigen::Matrix3Xd::Zero(3, kit.model.n_vertices()), basis.mesh_hash ^ 1u};
  try {
    encode(basis, field);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformed);
  }
  field.mesh_hash = 0;
  EXPECT_NO_THROW(encode(basis, field));
  field.vectors = Eigen::Matrix3Xd::Zero(3, 5);
  try {
    encode(basis, field);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSizing);
  }
  SpectralCoeffs wrong{Eigen::VectorXd::Zero(7)};
  EXPECT_THROW(decode(basis, wrong), Error);
}

TEST(SpectralCoding, CoefficientLayoutIsAxisBlocked) {
  const auto& kit = testing::small_kit();
  const SpectralBasis basis = truncate(kit.spectrum, 8);
  DisplacementField field{Eigen::Matrix3Xd::Zero(3, kit.model.n_vertices()), 0};
  field.vectors.row(1) = basis.vectors.col(3).transpose();  // y axis, mode 3
  const SpectralCoeffs c = encode(basis, field);
  ASSERT_EQ(c.values.size(), 24);
  for (Index i = 0; i < 24; ++i) EXPECT_NEAR(c.values[i], i == 8 + 3 ? 1.0 : 0.0, 1e-12);
}

TEST(SpectralCoding, TruncateKeepsLeadingPairs) {
  const auto& kit = testing::small_kit();
  const SpectralBasis t = truncate(kit.spectrum, 5);
  EXPECT_EQ(t.k(), 5);
  EXPECT_EQ(t.eigenvalues, kit.spectrum.eigenvalues.head(5));
  EXPECT_EQ(t.vectors, kit.spectrum.vectors.leftCols(5));
  EXPECT_EQ(t.mesh_hash, kit.spectrum.mesh_hash);
  EXPECT_THROW(truncate(kit.spectrum, kit.spectrum.k() + 1), Error);
}

}  // namespace
}  // namespace morphfit

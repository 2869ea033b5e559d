#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace morphfit {

using Index = Eigen::Index;
using Triangle = std::array<std::uint32_t, 3>;

/// Per-vertex region labels. Numeric ids are part of the model file format.
enum class SemanticLabel : std::uint8_t {
  kEyes = 0,
  kEyebrows = 1,
  kNose = 2,
  kLips = 3,
  kInnerMouth = 4,
  kOther = 5,
};

inline constexpr int kSemanticLabelCount = 6;
std::string_view label_name(SemanticLabel label);

/// Vertex positions of one face, stored as a flat (x0, y0, z0, x1, ...) vector in millimeters.
struct Shape {
  Eigen::VectorXd positions;

  Shape() = default;
  explicit Shape(Eigen::VectorXd p) : positions(std::move(p)) {}

  Index vertex_count() const { return positions.size() / 3; }
  Eigen::Vector3d vertex(Index v) const { return positions.segment<3>(3 * v); }
  void set_vertex(Index v, const Eigen::Vector3d& x) { positions.segment<3>(3 * v) = x; }

  /// 3 x N column view.
  Eigen::Map<const Eigen::Matrix3Xd> matrix() const {
    return {positions.data(), 3, vertex_count()};
  }
  Eigen::Map<Eigen::Matrix3Xd> matrix() { return {positions.data(), 3, vertex_count()}; }
};

struct Coefficients {
  Eigen::VectorXd identity;
  Eigen::VectorXd expression;
};

/// Rank-3 bilinear face model with mesh metadata.
///
/// The core tensor has shape (3N, N_a, N_e). It is stored identity-major: the 3N-vector
/// for identity mode i and expression mode j is contiguous and starts at
/// ((i * N_e) + j) * 3N. Identity mode 0 is the reference (mean) identity.
class BilinearModel {
 public:
  BilinearModel() = default;
  BilinearModel(Index n_vertices, Index n_identity, Index n_expression, std::vector<double> tensor,
                std::vector<Triangle> topology, std::vector<Eigen::Vector2d> uv,
                std::vector<std::uint8_t> semantic, std::vector<std::uint32_t> landmark_indices,
                Eigen::VectorXd neutral_expression);

  Index n_vertices() const { return n_vertices_; }
  Index n_identity() const { return n_identity_; }
  Index n_expression() const { return n_expression_; }
  Index n_rows() const { return 3 * n_vertices_; }

  std::span<const double> tensor() const { return tensor_; }
  const std::vector<Triangle>& topology() const { return topology_; }
  const std::vector<Eigen::Vector2d>& uv() const { return uv_; }
  const std::vector<std::uint8_t>& semantic() const { return semantic_; }
  const std::vector<std::uint32_t>& landmark_indices() const { return landmarks_; }
  const Eigen::VectorXd& neutral_expression() const { return neutral_; }
  Index landmark_count() const { return static_cast<Index>(landmarks_.size()); }

  /// tensor[row, i, j]
  double at(Index row, Index i, Index j) const {
    return tensor_[static_cast<std::size_t>(((i * n_expression_) + j) * n_rows() + row)];
  }

  /// Contiguous 3N slice for (identity mode i, expression mode j).
  Eigen::Map<const Eigen::VectorXd> slice(Index i, Index j) const {
    return {tensor_.data() + ((i * n_expression_) + j) * n_rows(), n_rows()};
  }

  /// The tensor viewed as a 3N x (N_a * N_e) matrix; column (i * N_e + j) is slice(i, j).
  Eigen::Map<const Eigen::MatrixXd> unfolded() const {
    return {tensor_.data(), n_rows(), n_identity_ * n_expression_};
  }

  /// Identity mode pinned to 1 during alternating fits (removes the bilinear scale gauge).
  Index reference_identity() const { return 0; }
  /// Expression mode with the largest neutral weight, or -1 when the neutral vector is zero.
  Index reference_expression() const;

  /// One-hot identity coefficients selecting the reference identity mode.
  Eigen::VectorXd reference_identity_vector() const;

 private:
  Index n_vertices_ = 0;
  Index n_identity_ = 0;
  Index n_expression_ = 0;
  std::vector<double> tensor_;
  std::vector<Triangle> topology_;
  std::vector<Eigen::Vector2d> uv_;
  std::vector<std::uint8_t> semantic_;
  std::vector<std::uint32_t> landmarks_;
  Eigen::VectorXd neutral_;
};

/// positions[r] = sum_ij tensor[r, i, j] a[i] e[j]
Shape contract_bilinear(const BilinearModel& model, const Eigen::VectorXd& identity,
                        const Eigen::VectorXd& expression);
Shape contract_bilinear(const BilinearModel& model, const Coefficients& coeffs);

/// 3N x N_e matrix B with contract(a, e) = B e.
Eigen::MatrixXd expression_basis(const BilinearModel& model, const Eigen::VectorXd& identity);
/// 3N x N_a matrix B with contract(a, e) = B a.
Eigen::MatrixXd identity_basis(const BilinearModel& model, const Eigen::VectorXd& expression);

/// Rows of expression_basis restricted to the given vertices (3 rows per vertex, in order).
Eigen::MatrixXd expression_basis_rows(const BilinearModel& model, const Eigen::VectorXd& identity,
                                      std::span<const std::uint32_t> vertices);
Eigen::MatrixXd identity_basis_rows(const BilinearModel& model, const Eigen::VectorXd& expression,
                                    std::span<const std::uint32_t> vertices);

/// Shape restricted to model landmarks as a 3 x L matrix.
Eigen::Matrix3Xd landmark_positions(const BilinearModel& model, const Shape& shape);

}  // namespace morphfit

#include "morphfit/model.hpp"

#include <cmath>
#include <string>

#include "morphfit/error.hpp"

namespace morphfit {

std::string_view label_name(SemanticLabel label) {
  switch (label) {
    case SemanticLabel::kEyes: return "eyes";
    case SemanticLabel::kEyebrows: return "eyebrows";
    case SemanticLabel::kNose: return "nose";
    case SemanticLabel::kLips: return "lips";
    case SemanticLabel::kInnerMouth: return "inner_mouth";
    case SemanticLabel::kOther: return "other";
  }
  return "unknown";
}

BilinearModel::BilinearModel(Index n_vertices, Index n_identity, Index n_expression,
                             std::vector<double> tensor, std::vector<Triangle> topology,
                             std::vector<Eigen::Vector2d> uv, std::vector<std::uint8_t> semantic,
                             std::vector<std::uint32_t> landmark_indices,
                             Eigen::VectorXd neutral_expression)
    : n_vertices_(n_vertices),
      n_identity_(n_identity),
      n_expression_(n_expression),
      tensor_(std::move(tensor)),
      topology_(std::move(topology)),
      uv_(std::move(uv)),
      semantic_(std::move(semantic)),
      landmarks_(std::move(landmark_indices)),
      neutral_(std::move(neutral_expression)) {
  if (n_vertices_ <= 0 || n_identity_ <= 0 || n_expression_ <= 0) {
    fail(ErrorCode::kSizing, "model dimensions must be positive");
  }
  const auto expected = static_cast<std::size_t>(3 * n_vertices_ * n_identity_ * n_expression_);
  if (tensor_.size() != expected) {
    fail(ErrorCode::kSizing, "tensor has " + std::to_string(tensor_.size()) + " entries, expected " +
                                 std::to_string(expected));
  }
  for (const auto& tri : topology_) {
    for (auto v : tri) {
      if (static_cast<Index>(v) >= n_vertices_) {
        fail(ErrorCode::kMalformed, "triangle index " + std::to_string(v) + " out of range");
      }
    }
  }
  if (static_cast<Index>(uv_.size()) != n_vertices_) {
    fail(ErrorCode::kSizing, "uv count does not match vertex count");
  }
  for (const auto& t : uv_) {
    if (!(t.x() >= 0.0 && t.x() <= 1.0 && t.y() >= 0.0 && t.y() <= 1.0)) {
      fail(ErrorCode::kMalformed, "uv coordinate outside [0,1]^2");
    }
  }
  if (static_cast<Index>(semantic_.size()) != n_vertices_) {
    fail(ErrorCode::kSizing, "semantic label count does not match vertex count");
  }
  for (auto label : semantic_) {
    if (label >= kSemanticLabelCount) {
      fail(ErrorCode::kMalformed, "semantic label " + std::to_string(label) + " not in legend");
    }
  }
  for (auto v : landmarks_) {
    if (static_cast<Index>(v) >= n_vertices_) {
      fail(ErrorCode::kMalformed, "landmark index " + std::to_string(v) + " out of range");
    }
  }
  if (neutral_.size() != n_expression_) {
    fail(ErrorCode::kSizing, "neutral expression length does not match N_e");
  }
}

Index BilinearModel::reference_expression() const {
  Index best = -1;
  double best_value = 0.0;
  for (Index j = 0; j < neutral_.size(); ++j) {
    if (std::abs(neutral_[j]) > best_value) {
      best_value = std::abs(neutral_[j]);
      best = j;
    }
  }
  return best;
}

Eigen::VectorXd BilinearModel::reference_identity_vector() const {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n_identity_);
  a[reference_identity()] = 1.0;
  return a;
}

namespace {

void check_lengths(const BilinearModel& model, const Eigen::VectorXd* identity,
                   const Eigen::VectorXd* expression) {
  if (identity != nullptr && identity->size() != model.n_identity()) {
    fail(ErrorCode::kSizing, "identity vector has length " + std::to_string(identity->size()) +
                                 ", model expects " + std::to_string(model.n_identity()));
  }
  if (expression != nullptr && expression->size() != model.n_expression()) {
    fail(ErrorCode::kSizing, "expression vector has length " +
                                 std::to_string(expression->size()) + ", model expects " +
                                 std::to_string(model.n_expression()));
  }
}

}  // namespace

Shape contract_bilinear(const BilinearModel& model, const Eigen::VectorXd& identity,
                        const Eigen::VectorXd& expression) {
  check_lengths(model, &identity, &expression);
  // Contract the expression mode first, then identity.
  return Shape(expression_basis(model, identity) * expression);
}

Shape contract_bilinear(const BilinearModel& model, const Coefficients& coeffs) {
  return contract_bilinear(model, coeffs.identity, coeffs.expression);
}

Eigen::MatrixXd expression_basis(const BilinearModel& model, const Eigen::VectorXd& identity) {
  check_lengths(model, &identity, nullptr);
  const Index ne = model.n_expression();
  const auto unfolded = model.unfolded();
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(model.n_rows(), ne);
  for (Index i = 0; i < model.n_identity(); ++i) {
    if (identity[i] == 0.0) continue;
    basis.noalias() += identity[i] * unfolded.middleCols(i * ne, ne);
  }
  return basis;
}

Eigen::MatrixXd identity_basis(const BilinearModel& model, const Eigen::VectorXd& expression) {
  check_lengths(model, nullptr, &expression);
  const Index ne = model.n_expression();
  const auto unfolded = model.unfolded();
  Eigen::MatrixXd basis(model.n_rows(), model.n_identity());
  for (Index i = 0; i < model.n_identity(); ++i) {
    basis.col(i).noalias() = unfolded.middleCols(i * ne, ne) * expression;
  }
  return basis;
}

Eigen::MatrixXd expression_basis_rows(const BilinearModel& model, const Eigen::VectorXd& identity,
                                      std::span<const std::uint32_t> vertices) {
  check_lengths(model, &identity, nullptr);
  const Index ne = model.n_expression();
  const Index rows = model.n_rows();
  const auto data = model.tensor();
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(3 * static_cast<Index>(vertices.size()), ne);
  for (Index i = 0; i < model.n_identity(); ++i) {
    const double ai = identity[i];
    if (ai == 0.0) continue;
    for (Index j = 0; j < ne; ++j) {
      const double* slice = data.data() + ((i * ne) + j) * rows;
      for (std::size_t k = 0; k < vertices.size(); ++k) {
        const Index base = 3 * static_cast<Index>(vertices[k]);
        for (Index c = 0; c < 3; ++c) basis(3 * static_cast<Index>(k) + c, j) += ai * slice[base + c];
      }
    }
  }
  return basis;
}

Eigen::MatrixXd identity_basis_rows(const BilinearModel& model, const Eigen::VectorXd& expression,
                                    std::span<const std::uint32_t> vertices) {
  check_lengths(model, nullptr, &expression);
  const Index ne = model.n_expression();
  const Index rows = model.n_rows();
  const auto data = model.tensor();
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(3 * static_cast<Index>(vertices.size()),
                                                model.n_identity());
  for (Index i = 0; i < model.n_identity(); ++i) {
    for (Index j = 0; j < ne; ++j) {
      const double ej = expression[j];
      if (ej == 0.0) continue;
      const double* slice = data.data() + ((i * ne) + j) * rows;
      for (std::size_t k = 0; k < vertices.size(); ++k) {
        const Index base = 3 * static_cast<Index>(vertices[k]);
        for (Index c = 0; c < 3; ++c) basis(3 * static_cast<Index>(k) + c, i) += ej * slice[base + c];
      }
    }
  }
  return basis;
}

Eigen::Matrix3Xd landmark_positions(const BilinearModel& model, const Shape& shape) {
  if (shape.vertex_count() != model.n_vertices()) {
    fail(ErrorCode::kSizing, "shape does not belong to this model");
  }
  const auto& lm = model.landmark_indices();
  Eigen::Matrix3Xd out(3, static_cast<Index>(lm.size()));
  for (std::size_t k = 0; k < lm.size(); ++k) out.col(static_cast<Index>(k)) = shape.vertex(lm[k]);
  return out;
}

}  // namespace morphfit

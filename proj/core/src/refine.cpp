#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>

#include "morphfit/error.hpp"
#include "morphfit/fitting.hpp"
#include "morphfit/spectral.hpp"

namespace morphfit {
namespace {

/// L^T L + anchor * I, the smoothness energy on one displacement axis.
SparseMatrix smoothness_operator(const BilinearModel& model, double anchor) {
  const SparseMatrix laplacian = graph_laplacian(model.topology(), model.n_vertices());
  SparseMatrix op = SparseMatrix(laplacian.transpose()) * laplacian;
  if (anchor > 0.0) {
    SparseMatrix identity(op.rows(), op.cols());
    identity.setIdentity();
    op += anchor * identity;
  }
  return op;
}

void check_shape(const BilinearModel& model, const Shape& shape) {
  if (shape.vertex_count() != model.n_vertices()) {
    fail(ErrorCode::kSizing, "shape does not belong to this model");
  }
}

}  // namespace

RefineResult refine_with_depth(const BilinearModel& model, const Shape& shape,
                               const DepthCloud& depth, const FitConfig& config) {
  validate(config);
  check_shape(model, shape);
  if (depth.points.cols() == 0) fail(ErrorCode::kInvalidArgument, "depth cloud is empty");
  if (!depth.points.allFinite()) fail(ErrorCode::kMalformed, "depth cloud has non-finite points");

  const Index n = model.n_vertices();
  const double weight = config.depth_regularization;
  const SparseMatrix smooth = smoothness_operator(model, config.displacement_anchor);
  const Eigen::Matrix3Xd base = shape.matrix();
  Eigen::Matrix3Xd displacement = Eigen::Matrix3Xd::Zero(3, n);
  const double max_sq = config.max_correspondence_distance * config.max_correspondence_distance;

  RefineResult result;
  for (int it = 0; it < config.depth_iterations; ++it) {
    const Eigen::Matrix3Xd current = base + displacement;
    Eigen::Matrix3Xd targets(3, n);
    Eigen::VectorXd constrained = Eigen::VectorXd::Zero(n);
    for (Index v = 0; v < n; ++v) {
      Index best = 0;
      double best_sq = std::numeric_limits<double>::infinity();
      for (Index p = 0; p < depth.points.cols(); ++p) {
        const double sq = (depth.points.col(p) - current.col(v)).squaredNorm();
        if (sq < best_sq) {
          best_sq = sq;
          best = p;
        }
      }
      targets.col(v) = depth.points.col(best);
      if (best_sq <= max_sq) constrained[v] = 1.0;
    }
    if (weight == 0.0 && constrained.minCoeff() == 0.0) {
      fail(ErrorCode::kDegenerate,
           "zero regularization with unmatched vertices leaves the displacement undetermined");
    }

    SparseMatrix system = weight * smooth;
    for (Index v = 0; v < n; ++v) system.coeffRef(v, v) += constrained[v];
    Eigen::SimplicialLDLT<SparseMatrix> solver(system);
    if (solver.info() != Eigen::Success) fail(ErrorCode::kNumerical, "depth refinement solve failed");

    for (Index axis = 0; axis < 3; ++axis) {
      const Eigen::VectorXd rhs =
          constrained.cwiseProduct((targets.row(axis) - base.row(axis)).transpose());
      displacement.row(axis) = solver.solve(rhs).transpose();
    }

    double energy = 0.0;
    for (Index v = 0; v < n; ++v) {
      energy += constrained[v] * (base.col(v) + displacement.col(v) - targets.col(v)).squaredNorm();
    }
    for (Index axis = 0; axis < 3; ++axis) {
      const Eigen::VectorXd d = displacement.row(axis).transpose();
      energy += weight * d.dot(smooth * d);
    }
    result.objective_history.push_back(energy);
  }

  result.shape = shape;
  result.shape.matrix() = base + displacement;
  return result;
}

Shape refine_with_landmarks(const BilinearModel& model, const Shape& shape, const CameraPose& pose,
                            const Eigen::Matrix2Xd& landmarks, const FitConfig& config) {
  validate(config);
  check_shape(model, shape);
  if (landmarks.cols() != model.landmark_count()) {
    fail(ErrorCode::kSizing, "landmark count does not match the model");
  }
  const Index n = model.n_vertices();
  const double weight = config.depth_regularization;
  if (weight == 0.0 && model.landmark_count() < n) {
    fail(ErrorCode::kDegenerate,
         "zero regularization with landmark-only constraints leaves the displacement undetermined");
  }

  // Unknowns interleaved as 3v + c. System: s^2 P^T R2^T R2 P + w (S (x) I3).
  const SparseMatrix smooth = smoothness_operator(model, config.displacement_anchor);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(smooth.nonZeros()) * 3 + 9 * landmarks.cols());
  for (Index col = 0; col < smooth.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(smooth, col); it; ++it) {
      for (Index c = 0; c < 3; ++c) {
        triplets.emplace_back(3 * it.row() + c, 3 * it.col() + c, weight * it.value());
      }
    }
  }
  const Eigen::Matrix<double, 2, 3> camera = pose.scale * pose.rotation.topRows<2>();
  const Eigen::Matrix3d normal_block = camera.transpose() * camera;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(3 * n);
  const Eigen::Matrix2Xd projected = project_points(pose, landmark_positions(model, shape));
  const auto& lm = model.landmark_indices();
  for (Index k = 0; k < landmarks.cols(); ++k) {
    const Index v = lm[static_cast<std::size_t>(k)];
    for (Index r = 0; r < 3; ++r) {
      for (Index c = 0; c < 3; ++c) triplets.emplace_back(3 * v + r, 3 * v + c, normal_block(r, c));
    }
    rhs.segment<3>(3 * v) += camera.transpose() * (landmarks.col(k) - projected.col(k));
  }
  SparseMatrix system(3 * n, 3 * n);
  system.setFromTriplets(triplets.begin(), triplets.end());

  Eigen::SimplicialLDLT<SparseMatrix> solver(system);
  if (solver.info() != Eigen::Success) {
    fail(ErrorCode::kDegenerate, "landmark refinement system is singular");
  }
  const Eigen::VectorXd displacement = solver.solve(rhs);
  if (!displacement.allFinite()) fail(ErrorCode::kNumerical, "landmark refinement diverged");
  return Shape(shape.positions + displacement);
}

}  // namespace morphfit

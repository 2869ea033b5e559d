#include "morphfit/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "morphfit/error.hpp"

namespace morphfit {

bool is_valid_pose(const CameraPose& pose, double tolerance) {
  const Eigen::Matrix3d gram = pose.rotation.transpose() * pose.rotation;
  return (gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tolerance &&
         std::abs(pose.rotation.determinant() - 1.0) <= tolerance && pose.scale > 0.0 &&
         pose.translation.allFinite();
}

Eigen::Matrix2Xd project_points(const CameraPose& pose, const Eigen::Matrix3Xd& points) {
  Eigen::Matrix2Xd out = pose.scale * (pose.rotation.topRows<2>() * points);
  out.colwise() += pose.translation;
  return out;
}

Eigen::Matrix2Xd project(const CameraPose& pose, const Shape& shape) {
  return project_points(pose, shape.matrix());
}

double reprojection_sse(const CameraPose& pose, const Eigen::Matrix3Xd& points3d,
                        const Eigen::Matrix2Xd& points2d) {
  return (project_points(pose, points3d) - points2d).squaredNorm();
}

namespace {

void check_correspondences(const Eigen::Matrix3Xd& points3d, const Eigen::Matrix2Xd& points2d) {
  if (points3d.cols() != points2d.cols()) {
    fail(ErrorCode::kSizing, "3D and 2D point counts differ");
  }
}

Eigen::Matrix3d orthonormal_rows(const Eigen::Matrix<double, 2, 3>& rows) {
  Eigen::JacobiSVD<Eigen::Matrix<double, 2, 3>> svd(rows, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix<double, 2, 3> polar = svd.matrixU() * svd.matrixV().leftCols<2>().transpose();
  Eigen::Matrix3d r;
  r.row(0) = polar.row(0);
  r.row(1) = polar.row(1);
  r.row(2) = polar.row(0).cross(polar.row(1));
  return r;
}

}  // namespace

CameraPose refine_camera(const CameraPose& initial, const Eigen::Matrix3Xd& points3d,
                         const Eigen::Matrix2Xd& points2d, int iterations) {
  check_correspondences(points3d, points2d);
  const Index n = points3d.cols();
  CameraPose pose = initial;
  double sse = reprojection_sse(pose, points3d, points2d);
  double damping = 1e-6;

  for (int it = 0; it < iterations && sse > 0.0; ++it) {
    // Parameters: left rotation increment (3), scale, translation (2).
    Eigen::MatrixXd jac(2 * n, 6);
    Eigen::VectorXd residual(2 * n);
    const Eigen::Matrix3Xd rotated = pose.rotation * points3d;
    for (Index k = 0; k < n; ++k) {
      const Eigen::Vector3d y = rotated.col(k);
      // d(R x)/d(omega) = -[y]_x
      Eigen::Matrix3d skew;
      skew << 0, -y.z(), y.y(), y.z(), 0, -y.x(), -y.y(), y.x(), 0;
      jac.block<2, 3>(2 * k, 0) = -pose.scale * skew.topRows<2>();
      jac.block<2, 1>(2 * k, 3) = y.head<2>();
      jac.block<2, 2>(2 * k, 4) = Eigen::Matrix2d::Identity();
      residual.segment<2>(2 * k) = pose.scale * y.head<2>() + pose.translation - points2d.col(k);
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * residual;

    bool improved = false;
    for (int attempt = 0; attempt < 8 && !improved; ++attempt) {
      Eigen::MatrixXd lhs = jtj;
      lhs.diagonal().array() += damping * (1.0 + jtj.diagonal().array());
      const Eigen::VectorXd step = -lhs.ldlt().solve(jtr);
      CameraPose candidate = pose;
      const Eigen::Vector3d omega = step.head<3>();
      if (omega.norm() > 0.0) {
        candidate.rotation = Eigen::AngleAxisd(omega.norm(), omega.normalized()).toRotationMatrix() *
                             pose.rotation;
        candidate.rotation = orthonormal_rows(candidate.rotation.topRows<2>());
      }
      candidate.scale = pose.scale + step[3];
      candidate.translation = pose.translation + step.tail<2>();
      if (candidate.scale > 0.0 && step.allFinite()) {
        const double candidate_sse = reprojection_sse(candidate, points3d, points2d);
        if (candidate_sse < sse) {
          pose = candidate;
          improved = sse - candidate_sse > 1e-15 * sse;
          sse = candidate_sse;
          damping = std::max(damping * 0.1, 1e-12);
          if (!improved) return pose;
          break;
        }
      }
      damping *= 10.0;
    }
    if (!improved) break;
  }
  return pose;
}

CameraPose estimate_camera(const Eigen::Matrix3Xd& points3d, const Eigen::Matrix2Xd& points2d) {
  check_correspondences(points3d, points2d);
  const Index n = points3d.cols();
  if (n < 4) fail(ErrorCode::kDegenerate, "camera estimation needs at least 4 correspondences");

  const Eigen::Vector3d mean3 = points3d.rowwise().mean();
  const Eigen::Vector2d mean2 = points2d.rowwise().mean();
  const Eigen::Matrix3Xd centered3 = points3d.colwise() - mean3;
  const Eigen::Matrix2Xd centered2 = points2d.colwise() - mean2;

  // Affine camera on centered coordinates: centered2 = A centered3.
  const Eigen::Matrix3d scatter = centered3 * centered3.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> spread(scatter);
  const double largest = spread.eigenvalues().maxCoeff();
  if (!(largest > 0.0) || spread.eigenvalues().minCoeff() <= 1e-12 * largest) {
    fail(ErrorCode::kDegenerate, "3D correspondences are coplanar or collinear");
  }
  const Eigen::Matrix<double, 2, 3> affine =
      (scatter.ldlt().solve(centered3 * centered2.transpose())).transpose();

  CameraPose pose;
  pose.rotation = orthonormal_rows(affine);
  pose.scale = 0.5 * (affine.row(0).norm() + affine.row(1).norm());
  if (!(pose.scale > 0.0)) fail(ErrorCode::kDegenerate, "affine camera has zero scale");

  // Closed-form scale for the orthonormalized rows, then translation from the centroids.
  const Eigen::Matrix2Xd rotated = pose.rotation.topRows<2>() * centered3;
  const double denom = rotated.squaredNorm();
  const double best_scale = rotated.cwiseProduct(centered2).sum() / denom;
  const auto translation_for = [&](double s) {
    return Eigen::Vector2d(mean2 - s * pose.rotation.topRows<2>() * mean3);
  };
  pose.translation = translation_for(pose.scale);
  if (best_scale > 0.0) {
    CameraPose rescaled = pose;
    rescaled.scale = best_scale;
    rescaled.translation = translation_for(best_scale);
    if (reprojection_sse(rescaled, points3d, points2d) <= reprojection_sse(pose, points3d, points2d)) {
      pose = rescaled;
    }
  }
  return refine_camera(pose, points3d, points2d);
}

void validate(const FitConfig& config) {
  if (config.max_outer_iterations < 1) fail(ErrorCode::kInvalidArgument, "max_outer_iterations < 1");
  if (!(config.convergence_tol > 0.0)) fail(ErrorCode::kInvalidArgument, "convergence_tol must be > 0");
  if (!(config.identity_ridge >= 0.0) || !(config.expression_ridge >= 0.0)) {
    fail(ErrorCode::kInvalidArgument, "ridge weights must be >= 0");
  }
  if (!(config.expression_bounds.lower <= config.expression_bounds.upper)) {
    fail(ErrorCode::kInvalidArgument, "expression bounds are inverted");
  }
  if (config.depth_iterations < 0) fail(ErrorCode::kInvalidArgument, "depth_iterations < 0");
  if (!(config.depth_regularization >= 0.0) || !(config.displacement_anchor >= 0.0)) {
    fail(ErrorCode::kInvalidArgument, "regularization weights must be >= 0");
  }
  if (!(config.max_correspondence_distance > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "max_correspondence_distance must be > 0");
  }
}

namespace {

struct Pin {
  Index index = -1;
  double value = 0.0;
};

/// Rows of B (3 per landmark) mapped through the camera: J c + t ~ landmarks.
void append_projected(const Eigen::MatrixXd& landmark_basis, const CameraPose& pose,
                      const Eigen::Matrix2Xd& landmarks, Eigen::MatrixXd& jac, Eigen::VectorXd& rhs,
                      Index row_offset) {
  const Eigen::Matrix<double, 2, 3> camera = pose.scale * pose.rotation.topRows<2>();
  for (Index k = 0; k < landmarks.cols(); ++k) {
    jac.block(row_offset + 2 * k, 0, 2, landmark_basis.cols()).noalias() =
        camera * landmark_basis.middleRows(3 * k, 3);
    rhs.segment<2>(row_offset + 2 * k) = landmarks.col(k) - pose.translation;
  }
}

/// min |J c - r|^2 + ridge |c|^2 subject to optional bounds, with an optional pinned entry.
Eigen::VectorXd solve_ridge(const Eigen::MatrixXd& jac, const Eigen::VectorXd& rhs, double ridge,
                            const std::optional<Bounds>& bounds, const Pin& pin) {
  const Index m = jac.cols();
  std::vector<Index> free;
  for (Index j = 0; j < m; ++j) {
    if (j != pin.index) free.push_back(j);
  }
  const auto nf = static_cast<Index>(free.size());
  Eigen::MatrixXd jf(jac.rows(), nf);
  for (Index c = 0; c < nf; ++c) jf.col(c) = jac.col(free[static_cast<std::size_t>(c)]);
  Eigen::VectorXd r = rhs;
  if (pin.index >= 0) r -= pin.value * jac.col(pin.index);

  if (ridge == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(jf);
    if (qr.rank() < nf) {
      fail(ErrorCode::kDegenerate,
           "normal equations are singular with zero ridge; use a positive ridge weight");
    }
  }
  Eigen::MatrixXd hessian = jf.transpose() * jf;
  hessian.diagonal().array() += ridge;
  const Eigen::VectorXd gradient_rhs = jf.transpose() * r;
  Eigen::VectorXd x = hessian.ldlt().solve(gradient_rhs);
  if (!x.allFinite()) fail(ErrorCode::kNumerical, "ridge solve produced non-finite coefficients");

  if (bounds) {
    const bool inside = (x.array() >= bounds->lower).all() && (x.array() <= bounds->upper).all();
    if (!inside) {
      // Projected cyclic coordinate descent on 1/2 x'Hx - g'x, started from the clamped solution.
      x = x.cwiseMax(bounds->lower).cwiseMin(bounds->upper);
      Eigen::VectorXd hx = hessian * x;
      for (int sweep = 0; sweep < 10000; ++sweep) {
        double largest_step = 0.0;
        for (Index j = 0; j < nf; ++j) {
          const double hjj = hessian(j, j);
          if (!(hjj > 0.0)) continue;
          const double updated =
              std::clamp(x[j] + (gradient_rhs[j] - hx[j]) / hjj, bounds->lower, bounds->upper);
          const double delta = updated - x[j];
          if (delta != 0.0) {
            hx.noalias() += delta * hessian.col(j);
            x[j] = updated;
            largest_step = std::max(largest_step, std::abs(delta));
          }
        }
        if (largest_step <= 1e-14) break;
      }
    }
  }

  Eigen::VectorXd out(m);
  if (pin.index >= 0) out[pin.index] = pin.value;
  for (Index c = 0; c < nf; ++c) out[free[static_cast<std::size_t>(c)]] = x[c];
  return out;
}

void check_landmarks(const BilinearModel& model, const Eigen::Matrix2Xd& landmarks) {
  if (landmarks.cols() != model.landmark_count()) {
    fail(ErrorCode::kSizing, "got " + std::to_string(landmarks.cols()) + " landmarks, model has " +
                                 std::to_string(model.landmark_count()));
  }
  if (!landmarks.allFinite()) fail(ErrorCode::kMalformed, "landmarks contain non-finite values");
}

Eigen::VectorXd expression_step(const BilinearModel& model, const Eigen::VectorXd& identity,
                                const CameraPose& pose, const Eigen::Matrix2Xd& landmarks,
                                double ridge, const std::optional<Bounds>& bounds, const Pin& pin) {
  const Eigen::MatrixXd basis = expression_basis_rows(model, identity, model.landmark_indices());
  Eigen::MatrixXd jac(2 * landmarks.cols(), model.n_expression());
  Eigen::VectorXd rhs(2 * landmarks.cols());
  append_projected(basis, pose, landmarks, jac, rhs, 0);
  return solve_ridge(jac, rhs, ridge, bounds, pin);
}

}  // namespace

Eigen::VectorXd solve_expression(const BilinearModel& model, const Eigen::VectorXd& identity,
                                 const CameraPose& pose, const Eigen::Matrix2Xd& landmarks,
                                 double ridge, Bounds bounds) {
  check_landmarks(model, landmarks);
  if (!(ridge >= 0.0)) fail(ErrorCode::kInvalidArgument, "ridge must be >= 0");
  return expression_step(model, identity, pose, landmarks, ridge, bounds, Pin{});
}

Eigen::VectorXd solve_identity(const BilinearModel& model, const Eigen::VectorXd& expression,
                               const CameraPose& pose, const Eigen::Matrix2Xd& landmarks,
                               double ridge) {
  check_landmarks(model, landmarks);
  if (!(ridge >= 0.0)) fail(ErrorCode::kInvalidArgument, "ridge must be >= 0");
  const Eigen::MatrixXd basis = identity_basis_rows(model, expression, model.landmark_indices());
  Eigen::MatrixXd jac(2 * landmarks.cols(), model.n_identity());
  Eigen::VectorXd rhs(2 * landmarks.cols());
  append_projected(basis, pose, landmarks, jac, rhs, 0);
  return solve_ridge(jac, rhs, ridge, std::nullopt, Pin{});
}

double landmark_rmse(const BilinearModel& model, const Shape& shape, const CameraPose& pose,
                     const Eigen::Matrix2Xd& landmarks) {
  check_landmarks(model, landmarks);
  const double sse = reprojection_sse(pose, landmark_positions(model, shape), landmarks);
  return std::sqrt(sse / static_cast<double>(std::max<Index>(1, landmarks.cols())));
}

JointFitResult fit_joint(const BilinearModel& model, std::span<const Eigen::Matrix2Xd> landmark_sets,
                         const FitConfig& config) {
  validate(config);
  if (landmark_sets.empty()) fail(ErrorCode::kInvalidArgument, "joint fit needs at least one image");
  for (const auto& set : landmark_sets) check_landmarks(model, set);

  const auto images = landmark_sets.size();
  const auto& lm = model.landmark_indices();
  const Index n_lm = model.landmark_count();
  const std::optional<Bounds> bounds = config.expression_bounds;

  // The bilinear model is invariant under (s, a, e) -> (s / (c d), c a, d e); pinning one identity
  // and one expression coefficient fixes that gauge.
  const Pin identity_pin{model.reference_identity(), 1.0};
  const Index ref_e = model.reference_expression();
  const Pin expression_pin{ref_e, ref_e >= 0 ? model.neutral_expression()[ref_e] : 0.0};

  JointFitResult result;
  result.identity = model.reference_identity_vector();
  result.expressions.assign(images, model.neutral_expression());
  result.poses.resize(images);

  const auto landmark_points = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& e) {
    const Eigen::VectorXd flat = expression_basis_rows(model, a, lm) * e;
    return Eigen::Matrix3Xd(Eigen::Map<const Eigen::Matrix3Xd>(flat.data(), 3, n_lm));
  };
  const auto image_sse = [&](std::size_t k) {
    return reprojection_sse(result.poses[k], landmark_points(result.identity, result.expressions[k]),
                            landmark_sets[k]);
  };
  const auto objective = [&]() {
    double total = config.identity_ridge * result.identity.squaredNorm();
    for (std::size_t k = 0; k < images; ++k) {
      total += image_sse(k) + config.expression_ridge * result.expressions[k].squaredNorm();
    }
    return total;
  };

  for (std::size_t k = 0; k < images; ++k) {
    result.poses[k] = estimate_camera(landmark_points(result.identity, result.expressions[k]),
                                      landmark_sets[k]);
  }
  double previous = objective();
  result.objective_history.push_back(previous);

  for (int it = 1; it <= config.max_outer_iterations; ++it) {
    result.iterations = it;

    // Camera block: keep the better of a fresh estimate and a polish of the current pose.
    for (std::size_t k = 0; k < images; ++k) {
      const Eigen::Matrix3Xd points = landmark_points(result.identity, result.expressions[k]);
      const double current = reprojection_sse(result.poses[k], points, landmark_sets[k]);
      CameraPose candidate = estimate_camera(points, landmark_sets[k]);
      if (reprojection_sse(candidate, points, landmark_sets[k]) > current) {
        candidate = refine_camera(result.poses[k], points, landmark_sets[k]);
      }
      if (reprojection_sse(candidate, points, landmark_sets[k]) <= current) result.poses[k] = candidate;
    }

    // Identity block: normal equations stacked over images in a fixed order.
    {
      Eigen::MatrixXd jac(2 * n_lm * static_cast<Index>(images), model.n_identity());
      Eigen::VectorXd rhs(jac.rows());
      for (std::size_t k = 0; k < images; ++k) {
        const Eigen::MatrixXd basis = identity_basis_rows(model, result.expressions[k], lm);
        append_projected(basis, result.poses[k], landmark_sets[k], jac, rhs,
                         2 * n_lm * static_cast<Index>(k));
      }
      const Eigen::VectorXd before = result.identity;
      const double before_objective = objective();
      result.identity = solve_ridge(jac, rhs, config.identity_ridge, std::nullopt, identity_pin);
      if (objective() > before_objective) result.identity = before;
    }

    // Expression blocks, independent per image.
    for (std::size_t k = 0; k < images; ++k) {
      const Eigen::VectorXd before = result.expressions[k];
      const double before_cost =
          image_sse(k) + config.expression_ridge * result.expressions[k].squaredNorm();
      result.expressions[k] = expression_step(model, result.identity, result.poses[k],
                                              landmark_sets[k], config.expression_ridge, bounds,
                                              expression_pin);
      const double after_cost =
          image_sse(k) + config.expression_ridge * result.expressions[k].squaredNorm();
      if (after_cost > before_cost) result.expressions[k] = before;
    }

    const double current = objective();
    if (!std::isfinite(current)) fail(ErrorCode::kNumerical, "fit objective became non-finite");
    result.objective_history.push_back(current);
    const double change = std::abs(previous - current);
    previous = current;
    if (change <= config.convergence_tol * std::max(current, 1e-300)) {
      result.converged = true;
      break;
    }
  }

  result.summed_sse = 0.0;
  result.landmark_rmse.resize(images);
  for (std::size_t k = 0; k < images; ++k) {
    const double sse = image_sse(k);
    result.summed_sse += sse;
    result.landmark_rmse[k] = std::sqrt(sse / static_cast<double>(n_lm));
  }
  return result;
}

FitResult fit_image(const BilinearModel& model, const Eigen::Matrix2Xd& landmarks,
                    const FitConfig& config) {
  const JointFitResult joint = fit_joint(model, std::span<const Eigen::Matrix2Xd>(&landmarks, 1), config);
  FitResult result;
  result.pose = joint.poses.front();
  result.coeffs.identity = joint.identity;
  result.coeffs.expression = joint.expressions.front();
  result.landmark_rmse = joint.landmark_rmse.front();
  result.iterations = joint.iterations;
  result.converged = joint.converged;
  result.objective_history = joint.objective_history;
  return result;
}

Eigen::Matrix3Xd to_camera_frame(const CameraPose& pose, const Eigen::Matrix3Xd& model_points) {
  Eigen::Matrix3Xd out = pose.rotation * model_points;
  out.topRows<2>().colwise() += pose.translation / pose.scale;
  return out;
}

Eigen::Matrix3Xd to_model_frame(const CameraPose& pose, const Eigen::Matrix3Xd& camera_points) {
  Eigen::Matrix3Xd shifted = camera_points;
  shifted.topRows<2>().colwise() -= pose.translation / pose.scale;
  return pose.rotation.transpose() * shifted;
}

}  // namespace morphfit

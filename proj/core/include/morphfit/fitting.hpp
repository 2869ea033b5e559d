#pragma once

#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "morphfit/model.hpp"

namespace morphfit {

/// Weak-perspective (scaled orthographic) camera: p = scale * R[0:2] x + translation.
/// Camera space is x_cam = R x; the viewer looks along +z, so smaller z is closer.
struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  double scale = 1.0;                                  // pixels per mm
  Eigen::Vector2d translation = Eigen::Vector2d::Zero();  // pixels
};

bool is_valid_pose(const CameraPose& pose, double tolerance = 1e-8);

Eigen::Matrix2Xd project_points(const CameraPose& pose, const Eigen::Matrix3Xd& points);
Eigen::Matrix2Xd project(const CameraPose& pose, const Shape& shape);

/// Least-squares weak-perspective pose from 3D-2D correspondences: affine camera by linear LSQ,
/// polar orthonormalization of its rows, then a monotone Gauss-Newton polish of
/// (rotation, scale, translation). Needs >= 4 non-coplanar points.
CameraPose estimate_camera(const Eigen::Matrix3Xd& points3d, const Eigen::Matrix2Xd& points2d);

/// Gauss-Newton polish from an initial pose; never increases the reprojection residual.
CameraPose refine_camera(const CameraPose& initial, const Eigen::Matrix3Xd& points3d,
                         const Eigen::Matrix2Xd& points2d, int iterations = 10);

double reprojection_sse(const CameraPose& pose, const Eigen::Matrix3Xd& points3d,
                        const Eigen::Matrix2Xd& points2d);

struct Bounds {
  double lower = 0.0;
  double upper = 1.0;
};

struct FitConfig {
  int max_outer_iterations = 20;
  double convergence_tol = 1e-6;  // relative objective change
  double identity_ridge = 1e-4;
  double expression_ridge = 1e-4;
  Bounds expression_bounds{};
  int depth_iterations = 5;
  double depth_regularization = 1.0;
  /// Depth correspondences farther than this (mm) are dropped. Infinite by default.
  double max_correspondence_distance = std::numeric_limits<double>::infinity();
  /// Weight of |D|^2 relative to |L D|^2 inside the smoothness term. Pins the constant
  /// displacement, which the graph Laplacian alone does not see.
  double displacement_anchor = 1e-3;
};

/// Validates weights/tolerances; throws kInvalidArgument.
void validate(const FitConfig& config);

/// Ridge LSQ for expression coefficients; the box constraint is then enforced by projected
/// cyclic coordinate descent. Throws kDegenerate for singular normal equations with ridge 0.
Eigen::VectorXd solve_expression(const BilinearModel& model, const Eigen::VectorXd& identity,
                                 const CameraPose& pose, const Eigen::Matrix2Xd& landmarks,
                                 double ridge, Bounds bounds);

/// Unconstrained ridge LSQ for identity coefficients.
Eigen::VectorXd solve_identity(const BilinearModel& model, const Eigen::VectorXd& expression,
                               const CameraPose& pose, const Eigen::Matrix2Xd& landmarks,
                               double ridge);

struct FitResult {
  CameraPose pose;
  Coefficients coeffs;
  double landmark_rmse = 0.0;  // pixels
  int iterations = 0;
  bool converged = false;
  /// Objective (landmark SSE + ridge terms) after initialization, then after each outer iteration.
  std::vector<double> objective_history;
};

struct JointFitResult {
  Eigen::VectorXd identity;
  std::vector<CameraPose> poses;
  std::vector<Eigen::VectorXd> expressions;
  std::vector<double> landmark_rmse;
  double summed_sse = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_history;
};

/// Block-coordinate alternation camera -> identity -> expression until the relative objective
/// change drops below tolerance. Landmarks are 2 x L in model landmark order.
FitResult fit_image(const BilinearModel& model, const Eigen::Matrix2Xd& landmarks,
                    const FitConfig& config = {});

/// Shared identity across images; per-image pose and expression.
JointFitResult fit_joint(const BilinearModel& model, std::span<const Eigen::Matrix2Xd> landmark_sets,
                         const FitConfig& config = {});

struct DepthCloud {
  Eigen::Matrix3Xd points;  // camera-space mm
};

/// Camera space as used by depth sensors: x_cam = R x + [t / s, 0].
Eigen::Matrix3Xd to_camera_frame(const CameraPose& pose, const Eigen::Matrix3Xd& model_points);
Eigen::Matrix3Xd to_model_frame(const CameraPose& pose, const Eigen::Matrix3Xd& camera_points);

struct RefineResult {
  Shape shape;
  std::vector<double> objective_history;  // data + smoothness energy per iteration
};

/// Iterated closest-point displacement solve with uniform-Laplacian smoothness.
/// `depth` must be expressed in the model frame (see to_model_frame).
RefineResult refine_with_depth(const BilinearModel& model, const Shape& shape,
                               const DepthCloud& depth, const FitConfig& config = {});

/// Laplacian-regularized displacement that pulls projected landmarks onto the detections.
Shape refine_with_landmarks(const BilinearModel& model, const Shape& shape, const CameraPose& pose,
                            const Eigen::Matrix2Xd& landmarks, const FitConfig& config = {});

double landmark_rmse(const BilinearModel& model, const Shape& shape, const CameraPose& pose,
                     const Eigen::Matrix2Xd& landmarks);

}  // namespace morphfit

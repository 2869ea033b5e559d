#include <gtest/gtest.h>

#include <Eigen/Geometry>

#include "morphfit/error.hpp"
#include "morphfit/fitting.hpp"
#include "morphfit/synthkit.hpp"
#include "test_support.hpp"

namespace morphfit {
namespace {

using testing::default_kit;

FitConfig long_fit() {
  FitConfig c;
  c.max_outer_iterations = 200;
  return c;
}

Eigen::Matrix3d random_rotation(Rng& rng, double max_deg) {
  const double rad = max_deg * std::numbers::pi / 180.0;
  return (Eigen::AngleAxisd(rng.uniform(-rad, rad), Eigen::Vector3d::UnitX()) *
          Eigen::AngleAxisd(rng.uniform(-rad, rad), Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(rng.uniform(-rad, rad), Eigen::Vector3d::UnitZ()))
      .toRotationMatrix();
}

TEST(Camera, EstimateRecoversKnownPose) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::Matrix3Xd pts(3, 30);
    for (Index i = 0; i < pts.cols(); ++i) pts.col(i) = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) * 40.0;
    CameraPose truth;
    truth.rotation = random_rotation(rng, 40.0);
    truth.scale = rng.uniform(0.5, 2.0);
    truth.translation = Eigen::Vector2d(rng.uniform(50, 200), rng.uniform(50, 200));
    const Eigen::Matrix2Xd obs = project_points(truth, pts);

    const CameraPose est = estimate_camera(pts, obs);
    EXPECT_TRUE(is_valid_pose(est));
    EXPECT_NEAR(est.scale, truth.scale, 1e-8);
    EXPECT_LE((est.rotation.topRows<2>() - truth.rotation.topRows<2>()).norm(), 1e-8);
    EXPECT_LE((est.translation - truth.translation).norm(), 1e-6);
    EXPECT_LE(reprojection_sse(est, pts, obs), 1e-12);
  }
}

TEST(Camera, RefineNeverIncreasesResidual) {
  Rng rng(8);
  Eigen::Matrix3Xd pts(3, 20);
  for (Index i = 0; i < pts.cols(); ++i) pts.col(i) = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) * 30.0;
  CameraPose truth;
  truth.rotation = random_rotation(rng, 30.0);
  truth.scale = 1.3;
  Eigen::Matrix2Xd obs = project_points(truth, pts);
  for (Index i = 0; i < obs.cols(); ++i) obs.col(i) += Eigen::Vector2d(rng.normal(), rng.normal()) * 2.0;
  CameraPose start = truth;
  start.rotation = random_rotation(rng, 10.0) * truth.rotation;
  start.scale = 1.0;
  const double before = reprojection_sse(start, pts, obs);
  const CameraPose refined = refine_camera(start, pts, obs);
  EXPECT_TRUE(is_valid_pose(refined));
  EXPECT_LE(reprojection_sse(refined, pts, obs), before);
}

TEST(Camera, DegenerateInputsFail) {
  Eigen::Matrix3Xd planar(3, 6);
  planar << 0, 1, 2, 0, 1, 2, 0, 0, 0, 1, 1, 1, 0, 0, 0, 0, 0, 0;
  const Eigen::Matrix2Xd obs = planar.topRows<2>();
  try {
    estimate_camera(planar, obs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerate);
  }
  EXPECT_THROW(estimate_camera(planar.leftCols(3), obs.leftCols(3)), Error);
}

TEST(Camera, FrameConversionsInvert) {
  Rng rng(2);
  CameraPose pose;
  pose.rotation = random_rotation(rng, 30.0);
  pose.scale = 1.7;
  pose.translation = Eigen::Vector2d(12.0, -4.0);
  Eigen::Matrix3Xd pts = Eigen::Matrix3Xd::Random(3, 10) * 50.0;
  EXPECT_LE((to_model_frame(pose, to_camera_frame(pose, pts)) - pts).norm(), 1e-10);
}

TEST(FitImage, NoiselessScenesAreRecovered) {
  const auto& kit = default_kit();
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const Scene scene = sample_scene(kit, seed);
    const FitResult fit = fit_image(kit.model, scene.landmarks, long_fit());
    EXPECT_LT(fit.landmark_rmse, 1e-3) << "seed " << seed;
    const Shape shape = contract_bilinear(kit.model, fit.coeffs);
    EXPECT_LT(evaluate_rmse(shape, scene.shape), 0.1) << "seed " << seed;
    EXPECT_DOUBLE_EQ(fit.coeffs.identity[0], 1.0);
  }
}

TEST(FitImage, ObjectiveIsMonotoneAndExpressionBounded) {
  const auto& kit = default_kit();
  SceneOptions opts;
  opts.landmark_noise_px = 1.5;
  const Scene scene = sample_scene(kit, 21, opts);
  FitConfig config;
  config.expression_bounds = {0.0, 0.8};
  const FitResult fit = fit_image(kit.model, scene.landmarks, config);
  ASSERT_GE(fit.objective_history.size(), 2u);
  for (std::size_t i = 1; i < fit.objective_history.size(); ++i) {
    EXPECT_LE(fit.objective_history[i], fit.objective_history[i - 1] * (1.0 + 1e-12)) << i;
  }
  EXPECT_LE(fit.iterations, config.max_outer_iterations);
  // The reference expression carries the scale gauge and stays pinned at its neutral weight.
  const Index ref = kit.model.reference_expression();
  EXPECT_EQ(fit.coeffs.expression[ref], kit.model.neutral_expression()[ref]);
  for (Index j = 0; j < fit.coeffs.expression.size(); ++j) {
    if (j == ref) continue;
    EXPECT_GE(fit.coeffs.expression[j], 0.0) << j;
    EXPECT_LE(fit.coeffs.expression[j], 0.8) << j;
  }
  EXPECT_NEAR(fit.landmark_rmse, landmark_rmse(kit.model, contract_bilinear(kit.model, fit.coeffs), fit.pose,
                                               scene.landmarks),
              1e-9);
}

TEST(FitImage, DefaultIterationBudgetIsHonoured) {
  const auto& kit = default_kit();
  const Scene scene = sample_scene(kit, 31);
  const FitResult fit = fit_image(kit.model, scene.landmarks);
  EXPECT_LE(fit.iterations, 20);
  EXPECT_EQ(fit.objective_history.size(), static_cast<std::size_t>(fit.iterations) + 1);
}

TEST(FitImage, RejectsBadInputs) {
  const auto& kit = default_kit();
  const Scene scene = sample_scene(kit, 3);
  auto code_of = [&](const Eigen::Matrix2Xd& lm, const FitConfig& c) {
    try {
      fit_image(kit.model, lm, c);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kIo;
  };
  EXPECT_EQ(code_of(scene.landmarks.leftCols(10), {}), ErrorCode::kSizing);
  Eigen::Matrix2Xd nan = scene.landmarks;
  nan(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(code_of(nan, {}), ErrorCode::kMalformed);
  FitConfig bad;
  bad.identity_ridge = -1.0;
  EXPECT_EQ(code_of(scene.landmarks, bad), ErrorCode::kInvalidArgument);
  bad = {};
  bad.expression_bounds = {1.0, 0.0};
  EXPECT_EQ(code_of(scene.landmarks, bad), ErrorCode::kInvalidArgument);
}

TEST(Subproblems, ExpressionSolveRecoversTruthAndRespectsBounds) {
  const auto& kit = default_kit();
  const Scene scene = sample_scene(kit, 41);
  const Eigen::VectorXd e = solve_expression(kit.model, scene.coeffs.identity, scene.pose, scene.landmarks,
                                             0.0, {0.0, 1.0});
  EXPECT_LE((e - scene.coeffs.expression).lpNorm<Eigen::Infinity>(), 1e-6);
  const Eigen::VectorXd tight =
      solve_expression(kit.model, scene.coeffs.identity, scene.pose, scene.landmarks, 0.0, {0.0, 0.2});
  EXPECT_LE(tight.maxCoeff(), 0.2);
  EXPECT_GE(tight.minCoeff(), 0.0);

  const Eigen::VectorXd a = solve_identity(kit.model, scene.coeffs.expression, scene.pose, scene.landmarks, 0.0);
  EXPECT_LE((a - scene.coeffs.identity).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(FitJoint, SingleImageMatchesFitImage) {
  const auto& kit = default_kit();
  SceneOptions opts;
  opts.landmark_noise_px = 0.5;
  const Scene scene = sample_scene(kit, 51, opts);
  const FitResult single = fit_image(kit.model, scene.landmarks, long_fit());
  const std::vector<Eigen::Matrix2Xd> sets{scene.landmarks};
  const JointFitResult joint = fit_joint(kit.model, sets, long_fit());
  ASSERT_EQ(joint.poses.size(), 1u);
  EXPECT_LE((joint.identity - single.coeffs.identity).norm(), 1e-6);
  EXPECT_LE((joint.expressions[0] - single.coeffs.expression).norm(), 1e-6);
  EXPECT_NEAR(joint.landmark_rmse[0], single.landmark_rmse, 1e-6);
}

TEST(FitJoint, SharedIdentityIsRecoveredFromNoiselessImages) {
  const auto& kit = default_kit();
  SceneOptions opts;
  Rng rng(77);
  opts.identity = sample_coefficients(kit.spec, rng).identity;
  std::vector<Eigen::Matrix2Xd> sets;
  for (std::uint64_t s = 0; s < 3; ++s) sets.push_back(sample_scene(kit, 60 + s, opts).landmarks);
  const JointFitResult joint = fit_joint(kit.model, sets, long_fit());
  EXPECT_LE((joint.identity - *opts.identity).norm(), 1e-3);
  for (double r : joint.landmark_rmse) EXPECT_LT(r, 1e-2);
  for (std::size_t i = 1; i < joint.objective_history.size(); ++i) {
    EXPECT_LE(joint.objective_history[i], joint.objective_history[i - 1] * (1.0 + 1e-12));
  }
}

class DepthRefine : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto& kit = default_kit();
    scene = sample_scene(kit, 71);
    cloud.points = scene.shape.matrix();
  }
  Scene scene;
  DepthCloud cloud;
};

TEST_F(DepthRefine, ExactShapeIsAFixedPoint) {
  const RefineResult out = refine_with_depth(default_kit().model, scene.shape, cloud);
  EXPECT_LE((out.shape.positions - scene.shape.positions).lpNorm<Eigen::Infinity>(), 1e-9);
}

TEST_F(DepthRefine, PullsAnOffsetShapeTowardTheCloud) {
  Shape offset = scene.shape;
  for (Index v = 0; v < offset.vertex_count(); ++v) offset.set_vertex(v, offset.vertex(v) + Eigen::Vector3d(0, 0, 1.0));
  FitConfig config;
  config.depth_iterations = 10;
  const RefineResult out = refine_with_depth(default_kit().model, offset, cloud, config);
  const double before = evaluate_rmse(offset, scene.shape);
  const double after = evaluate_rmse(out.shape, scene.shape);
  EXPECT_LT(after, 0.5 * before);
  for (std::size_t i = 1; i < out.objective_history.size(); ++i) {
    EXPECT_LE(out.objective_history[i], out.objective_history[i - 1] * (1.0 + 1e-9));
  }
}

TEST_F(DepthRefine, HeavySmoothnessKeepsTheInput) {
  Shape offset = scene.shape;
  for (Index v = 0; v < offset.vertex_count(); ++v) offset.set_vertex(v, offset.vertex(v) + Eigen::Vector3d(0, 0, 1.0));
  FitConfig config;
  config.depth_regularization = 1e12;
  const RefineResult out = refine_with_depth(default_kit().model, offset, cloud, config);
  EXPECT_LE((out.shape.positions - offset.positions).lpNorm<Eigen::Infinity>(), 1e-4);
}

TEST_F(DepthRefine, EmptyCloudFails) {
  DepthCloud empty;
  EXPECT_THROW(refine_with_depth(default_kit().model, scene.shape, empty), Error);
}

TEST(LandmarkRefine, ReducesLandmarkError) {
  const auto& kit = default_kit();
  SceneOptions opts;
  opts.with_nonlinear = true;
  const Scene scene = sample_scene(kit, 81, opts);
  const FitResult fit = fit_image(kit.model, scene.landmarks, long_fit());
  const Shape linear = contract_bilinear(kit.model, fit.coeffs);
  const double before = landmark_rmse(kit.model, linear, fit.pose, scene.landmarks);
  const Shape refined = refine_with_landmarks(kit.model, linear, fit.pose, scene.landmarks);
  const double after = landmark_rmse(kit.model, refined, fit.pose, scene.landmarks);
  EXPECT_LT(after, before);
}

}  // namespace
}  // namespace morphfit

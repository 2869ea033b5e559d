#include <gtest/gtest.h>

#include <cstring>
#include <fstream>

#include <Eigen/Geometry>

#include "morphfit/bundle.hpp"
#include "morphfit/error.hpp"
#include "morphfit/image_io.hpp"
#include "morphfit/json_io.hpp"
#include "test_support.hpp"

namespace morphfit {
namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIo;
}

TEST(ImageIo, PngRoundTripQuantizes) {
  Image img(7, 5, 3);
  Rng rng(1);
  for (auto& v : img.data()) v = rng.uniform();
  const Image back = decode_png(encode_png(img));
  ASSERT_TRUE(back.same_size(img));
  ASSERT_EQ(back.channels(), 3);
  for (std::size_t i = 0; i < img.data().size(); ++i) {
    EXPECT_NEAR(back.data()[i], std::round(img.data()[i] * 255.0) / 255.0, 1e-12);
  }
  Image gray(4, 4, 1, 1.7);  // clamps
  EXPECT_EQ(decode_png(encode_png(gray)).at(2, 2, 0), 1.0);
  EXPECT_EQ(encode_png(img), encode_png(img));
  EXPECT_EQ(code_of([] { decode_png("not a png"); }), ErrorCode::kMalformed);
}

TEST(ImageIo, PfmRoundTripKeepsFloats) {
  testing::TempDir dir("pfm");
  for (int channels : {1, 3}) {
    Image img(6, 4, channels);
    Rng rng(2);
    for (auto& v : img.data()) v = static_cast<float>(rng.uniform(-100.0, 100.0));
    write_pfm(dir / "x.pfm", img);
    EXPECT_EQ(read_pfm(dir / "x.pfm"), img);
    EXPECT_EQ(read_image(dir / "x.pfm"), img);
  }
  std::ofstream(dir / "bad.pfm") << "P7\n1 1\n-1\n";
  EXPECT_EQ(code_of([&] { read_pfm(dir / "bad.pfm"); }), ErrorCode::kMalformed);
  std::ofstream(dir / "short.pfm") << "Pf\n4 4\n-1\nab";
  EXPECT_EQ(code_of([&] { read_pfm(dir / "short.pfm"); }), ErrorCode::kTruncatedPayload);
  EXPECT_EQ(code_of([&] { read_pfm(dir / "missing.pfm"); }), ErrorCode::kMissingInput);
  EXPECT_EQ(code_of([&] { write_pfm(dir / "two.pfm", Image(2, 2, 2)); }), ErrorCode::kInvalidArgument);
}

TEST(ImageIo, PfmStoresRowsBottomUp) {
  testing::TempDir dir("pfm_order");
  Image img(1, 2, 1);
  img.at(0, 0, 0) = 1.0;  // top row
  img.at(0, 1, 0) = 2.0;
  write_pfm(dir / "o.pfm", img);
  const std::string bytes = testing::read_bytes(dir / "o.pfm");
  float first = 0.0f;
  std::memcpy(&first, bytes.data() + bytes.size() - 8, 4);
  EXPECT_EQ(first, 2.0f);
}

TEST(Bundle, HighPrecisionPlanesKeepDoubles) {
  testing::TempDir dir("bundle");
  Bundle b;
  b.kind = "test";
  b.meta = {{"answer", 42}};
  Eigen::MatrixXd m(3, 4);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = 1.0 / (i + 3.0) + 1e3;
  b.planes.push_back({"precise", matrix_plane(m), true});
  b.planes.push_back({"coarse", matrix_plane(m), false});
  write_bundle(dir.path(), b);
  const Bundle back = read_bundle(dir.path());
  EXPECT_EQ(back.kind, "test");
  EXPECT_EQ(back.meta.at("answer"), 42);
  const Eigen::MatrixXd precise = plane_matrix(back.plane("precise").values);
  const Eigen::MatrixXd coarse = plane_matrix(back.plane("coarse").values);
  EXPECT_LE((precise - m).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_GT((coarse - m).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE((coarse - m).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_EQ(code_of([&] { (void)back.plane("nope"); }), ErrorCode::kMalformed);
  EXPECT_EQ(code_of([&] { read_bundle(dir / "none"); }), ErrorCode::kMissingInput);
}

TEST(JsonIo, LandmarksAcceptBareArrayAndObject) {
  Eigen::Matrix2Xd lm(2, 3);
  lm << 1, 2, 3, 4, 5, 6;
  EXPECT_EQ(landmarks_from_json(landmarks_to_json(lm)), lm);
  EXPECT_EQ(landmarks_from_json(Json::parse("[[1,4],[2,5],[3,6]]")), lm);
  EXPECT_EQ(code_of([] { landmarks_from_json(Json::parse("[[1,2,3]]")); }), ErrorCode::kMalformed);
  EXPECT_EQ(code_of([] { landmarks_from_json(Json::parse(R"({"landmarks": "x"})")); }), ErrorCode::kMalformed);
}

TEST(JsonIo, DepthPoseAndVectors) {
  DepthFile d;
  d.frame = "camera";
  d.points = Eigen::Matrix3Xd::Random(3, 4);
  const DepthFile back = depth_from_json(depth_to_json(d));
  EXPECT_EQ(back.frame, "camera");
  EXPECT_EQ(back.points, d.points);
  Json bad = depth_to_json(d);
  bad["frame"] = "world";
  EXPECT_EQ(code_of([&] { depth_from_json(bad); }), ErrorCode::kMalformed);

  CameraPose pose;
  pose.rotation = Eigen::AngleAxisd(0.3, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
  pose.scale = 1.25;
  pose.translation = Eigen::Vector2d(3.5, -2.0);
  const CameraPose p2 = pose_from_json(pose_to_json(pose));
  EXPECT_EQ(p2.rotation, pose.rotation);
  EXPECT_EQ(p2.scale, pose.scale);
  EXPECT_EQ(p2.translation, pose.translation);
  Json skew = pose_to_json(pose);
  skew["rotation"][0][0] = 5.0;
  EXPECT_EQ(code_of([&] { pose_from_json(skew); }), ErrorCode::kMalformed);

  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(5, 0.1, 0.9);
  EXPECT_EQ(vector_from_json(vector_to_json(v)), v);
  EXPECT_EQ(code_of([] { vector_from_json(Json::parse(R"([1, "a"])")); }), ErrorCode::kMalformed);
}

TEST(JsonIo, ExpressionPresetFormat) {
  const Eigen::VectorXd e = Eigen::VectorXd::LinSpaced(46, 0.0, 0.45);
  const Json j = expression_to_json(e, "smile");
  EXPECT_EQ(j.at("format"), "morphfit-expression");
  EXPECT_EQ(j.at("version"), 1);
  EXPECT_EQ(j.at("name"), "smile");
  EXPECT_EQ(expression_from_json(j), e);
  EXPECT_EQ(expression_from_json(Json{{"expression", {1.0, 0.5}}}), Eigen::Vector2d(1.0, 0.5));
  EXPECT_EQ(code_of([] { expression_from_json(Json::parse("[1, 2]")); }), ErrorCode::kMalformed);
  EXPECT_EQ(code_of([] { expression_from_json(Json{{"format", "other"}, {"expression", {1.0}}}); }),
            ErrorCode::kMalformed);
}

TEST(JsonIo, ConfigsRoundTripAndRejectUnknownKeys) {
  FitConfig fit;
  fit.max_outer_iterations = 77;
  fit.expression_bounds = {-0.5, 2.0};
  fit.max_correspondence_distance = 3.0;
  const FitConfig fit2 = fit_config_from_json(to_json(fit));
  EXPECT_EQ(fit2.max_outer_iterations, 77);
  EXPECT_EQ(fit2.expression_bounds.lower, -0.5);
  EXPECT_EQ(fit2.max_correspondence_distance, 3.0);
  EXPECT_EQ(fit_config_from_json(to_json(FitConfig{})).max_correspondence_distance,
            std::numeric_limits<double>::infinity());
  EXPECT_EQ(fit_config_from_json(Json{{"identity_ridge", 0.5}}).max_outer_iterations, 20);
  EXPECT_EQ(code_of([] { fit_config_from_json(Json{{"bogus", 1}}); }), ErrorCode::kMalformed);

  BlendConfig blend;
  blend.kernel = 5;
  blend.sigma2 = 2.5;
  blend.alpha_weights_input = false;
  const BlendConfig blend2 = blend_config_from_json(to_json(blend));
  EXPECT_EQ(blend2.kernel, 5);
  EXPECT_EQ(blend2.sigma2, 2.5);
  EXPECT_FALSE(blend2.alpha_weights_input);

  ShapeTrainConfig train;
  train.hidden = {16, 8};
  train.seed = 9;
  train.standardize_inputs = true;
  const ShapeTrainConfig train2 = train_config_from_json(to_json(train));
  EXPECT_EQ(train2.hidden, train.hidden);
  EXPECT_EQ(train2.seed, 9u);
  EXPECT_TRUE(train2.standardize_inputs);

  SyntheticSpec spec;
  spec.n_vertices = 300;
  spec.semi_axes = Eigen::Vector3d(1, 2, 3);
  const SyntheticSpec spec2 = synthetic_spec_from_json(to_json(spec));
  EXPECT_EQ(spec2.n_vertices, 300);
  EXPECT_EQ(spec2.semi_axes, spec.semi_axes);
  EXPECT_EQ(to_json(spec2), to_json(spec));

  BenchmarkConfig bench;
  bench.seeds = {4, 5};
  bench.train.epochs = 3;
  const BenchmarkConfig bench2 = benchmark_config_from_json(to_json(bench));
  EXPECT_EQ(bench2.seeds, bench.seeds);
  EXPECT_EQ(bench2.train.epochs, 3);
  EXPECT_TRUE(bench2.train.standardize_inputs);
}

TEST(JsonIo, DiscriminatorOutputsFromJson) {
  const Json j = {{"real_on_real", 1.0},         {"real_on_fake", {0.0, 0.5}},  {"pair_matched_real", 1.0},
                  {"pair_matched_fake", 0.0},    {"pair_mismatched_real", 0.0}, {"iden_real_real", 1.0},
                  {"iden_real_fake", 0.0},       {"iden_real_other", 0.0}};
  const DiscriminatorOutputs d = discriminator_from_json(j);
  EXPECT_EQ(d.real_on_fake.size(), 2);
  EXPECT_EQ(d.real_on_fake[1], 0.5);
}

TEST(JsonIo, FileHelpers) {
  testing::TempDir dir("json");
  write_json_file(dir / "a.json", Json{{"x", 1}});
  EXPECT_EQ(read_json_file(dir / "a.json").at("x"), 1);
  std::ofstream(dir / "bad.json") << "{ nope";
  EXPECT_EQ(code_of([&] { read_json_file(dir / "bad.json"); }), ErrorCode::kMalformed);
  EXPECT_EQ(code_of([&] { read_json_file(dir / "none.json"); }), ErrorCode::kMissingInput);
}

}  // namespace
}  // namespace morphfit

#include <gtest/gtest.h>

#include "morphfit/error.hpp"
#include "morphfit/shapenet.hpp"
#include "test_support.hpp"

namespace morphfit {
namespace {

struct Batch {
  Eigen::MatrixXd x;
  Eigen::MatrixXd y;
};

Batch random_batch(Index in, Index out, Index n, std::uint64_t seed) {
  Rng rng(seed);
  Batch b{Eigen::MatrixXd(in, n), Eigen::MatrixXd(out, n)};
  for (Index i = 0; i < b.x.size(); ++i) b.x.data()[i] = rng.normal();
  for (Index i = 0; i < b.y.size(); ++i) b.y.data()[i] = rng.normal();
  return b;
}

// Relative agreement with a floor at the finite-difference noise level (~1e-10 for h = 1e-6).
void expect_close(double analytic, double numeric, const std::string& what) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  EXPECT_LE(std::abs(analytic - numeric), 1e-4 * scale + 1e-9)
      << what << ": analytic " << analytic << " numeric " << numeric;
}

TEST(MlpGradient, MatchesCentralDifferencesOnTestNet) {
  const std::vector<int> dims{142, 32, 32, 30};
  MlpParams params = mlp_init(dims, 3);
  // Non-zero biases so every parameter group has a visible gradient.
  Rng rng(10);
  for (auto& layer : params.layers)
    for (Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = 0.1 * rng.normal();
  const Batch batch = random_batch(142, 30, 6, 11);
  const MlpGradient grad = mlp_gradient(params, batch.x, batch.y);
  EXPECT_NEAR(grad.loss, mlp_loss(params, batch.x, batch.y), 1e-14);

  const double h = 1e-6;
  std::size_t checked = 0;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& w = params.layers[l].weight;
    for (Index i = 0; i < w.size(); ++i) {
      const double keep = w.data()[i];
      w.data()[i] = keep + h;
      const double up = mlp_loss(params, batch.x, batch.y);
      w.data()[i] = keep - h;
      const double down = mlp_loss(params, batch.x, batch.y);
      w.data()[i] = keep;
      expect_close(grad.weight[l].data()[i], (up - down) / (2 * h), "W" + std::to_string(l) + "[" + std::to_string(i) + "]");
      ++checked;
    }
    auto& b = params.layers[l].bias;
    for (Index i = 0; i < b.size(); ++i) {
      const double keep = b[i];
      b[i] = keep + h;
      const double up = mlp_loss(params, batch.x, batch.y);
      b[i] = keep - h;
      const double down = mlp_loss(params, batch.x, batch.y);
      b[i] = keep;
      expect_close(grad.bias[l][i], (up - down) / (2 * h), "b" + std::to_string(l) + "[" + std::to_string(i) + "]");
      ++checked;
    }
  }
  EXPECT_EQ(checked, static_cast<std::size_t>(142 * 32 + 32 + 32 * 32 + 32 + 32 * 30 + 30));
}

TEST(MlpGradient, HoldsWithInputStandardization) {
  MlpParams params = mlp_init(std::vector<int>{5, 7, 3}, 1);
  params.input_mean = Eigen::VectorXd::LinSpaced(5, -1.0, 1.0);
  params.input_scale = Eigen::VectorXd::LinSpaced(5, 0.5, 2.0);
  const Batch batch = random_batch(5, 3, 4, 2);
  const MlpGradient grad = mlp_gradient(params, batch.x, batch.y);
  auto& w = params.layers[0].weight;
  for (Index i = 0; i < w.size(); ++i) {
    const double keep = w.data()[i];
    w.data()[i] = keep + 1e-6;
    const double up = mlp_loss(params, batch.x, batch.y);
    w.data()[i] = keep - 1e-6;
    const double down = mlp_loss(params, batch.x, batch.y);
    w.data()[i] = keep;
    expect_close(grad.weight[0].data()[i], (up - down) / 2e-6, "W0");
  }
}

TEST(Mlp, InitStatisticsAndShapes) {
  const MlpParams p = mlp_init(std::vector<int>{400, 300, 10}, 7);
  EXPECT_EQ(p.dims(), (std::vector<int>{400, 300, 10}));
  EXPECT_TRUE(p.layers[0].relu);
  EXPECT_FALSE(p.layers[1].relu);
  const auto& w = p.layers[0].weight;
  const double bound = std::sqrt(3.0 / 400.0);
  EXPECT_LE(w.cwiseAbs().maxCoeff(), bound);
  const double sd = std::sqrt(w.array().square().mean());
  EXPECT_NEAR(sd, 1.0 / std::sqrt(400.0), 0.05 / std::sqrt(400.0));
  EXPECT_TRUE(p.layers[0].bias.isZero());
  const MlpParams again = mlp_init(std::vector<int>{400, 300, 10}, 7);
  EXPECT_EQ(again.layers[1].weight, p.layers[1].weight);
}

TEST(Mlp, ForwardMatchesManualComputation) {
  MlpParams p;
  p.layers.push_back({Eigen::MatrixXd{{1.0, -1.0}, {2.0, 0.5}}, Eigen::Vector2d(0.0, -1.0), true});
  p.layers.push_back({Eigen::MatrixXd{{1.0, 1.0}}, Eigen::VectorXd::Constant(1, 0.25), false});
  // hidden = relu([1 - 3, 2 + 1.5 - 1]) = [0, 2.5]; out = 2.5 + 0.25
  EXPECT_DOUBLE_EQ(mlp_forward(p, Eigen::Vector2d(1.0, 3.0))[0], 2.75);
  Eigen::MatrixXd batch(2, 2);
  batch << 1.0, 0.0, 3.0, 0.0;
  const Eigen::MatrixXd out = mlp_forward_batch(p, batch);
  EXPECT_DOUBLE_EQ(out(0, 0), 2.75);
  EXPECT_DOUBLE_EQ(out(0, 1), 0.25);
}

TEST(Mlp, ValidationCatchesShapeErrors) {
  MlpParams p = mlp_init(std::vector<int>{4, 3, 2}, 0);
  p.layers[1].weight = Eigen::MatrixXd::Zero(2, 5);
  EXPECT_THROW(validate(p), Error);
  p = mlp_init(std::vector<int>{4, 3, 2}, 0);
  p.input_mean = Eigen::VectorXd::Zero(3);
  p.input_scale = Eigen::VectorXd::Ones(3);
  EXPECT_THROW(validate(p), Error);
  ShapeTrainConfig c;
  c.learning_rate = -1.0;
  EXPECT_THROW(validate(c), Error);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(validate(c), Error);
}

std::vector<ShapeSample> linear_task(int n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd map(6, 9);
  for (Index i = 0; i < map.size(); ++i) map.data()[i] = rng.normal();
  std::vector<ShapeSample> out;
  for (int s = 0; s < n; ++s) {
    Eigen::VectorXd a(3), e1(3), e2(3);
    for (int i = 0; i < 3; ++i) {
      a[i] = rng.normal();
      e1[i] = rng.uniform();
      e2[i] = rng.uniform();
    }
    ShapeSample sample;
    sample.input = shape_input(a, e1, e2);
    sample.target = map * sample.input;
    out.push_back(std::move(sample));
  }
  return out;
}

TEST(ShapeTraining, LossDecreasesAndRunsAreDeterministic) {
  const auto samples = linear_task(128, 5);
  ShapeTrainConfig c;
  c.hidden = {32, 32};
  c.learning_rate = 1e-3;
  c.epochs = 40;
  c.seed = 9;
  const ShapeTrainResult a = train_shape_branch(samples, c);
  ASSERT_EQ(a.epoch_loss.size(), 40u);
  EXPECT_LT(a.epoch_loss.back(), 0.2 * a.initial_loss);
  const ShapeTrainResult b = train_shape_branch(samples, c);
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
  for (std::size_t l = 0; l < a.params.layers.size(); ++l) {
    EXPECT_EQ(a.params.layers[l].weight, b.params.layers[l].weight);
  }
  c.seed = 10;
  const ShapeTrainResult other = train_shape_branch(samples, c);
  EXPECT_NE(other.params.layers[0].weight, a.params.layers[0].weight);
}

TEST(ShapeTraining, StandardizationStoresInputStatistics) {
  auto samples = linear_task(64, 6);
  for (auto& s : samples) s.input *= 100.0;
  ShapeTrainConfig c;
  c.hidden = {16};
  c.epochs = 3;
  c.standardize_inputs = true;
  const ShapeTrainResult r = train_shape_branch(samples, c);
  ASSERT_EQ(r.params.input_mean.size(), 9);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(9);
  for (const auto& s : samples) mean += s.input;
  mean /= 64.0;
  EXPECT_LE((r.params.input_mean - mean).norm(), 1e-9 * mean.norm());
  EXPECT_GT(r.params.input_scale.minCoeff(), 0.0);
}

TEST(ShapeTraining, MismatchedSamplesFail) {
  auto samples = linear_task(8, 1);
  samples[3].target = Eigen::VectorXd::Zero(2);
  EXPECT_THROW(train_shape_branch(samples, ShapeTrainConfig{}), Error);
  EXPECT_THROW(train_shape_branch(std::vector<ShapeSample>{}, ShapeTrainConfig{}), Error);
}

TEST(ShapeBranch, PredictDecodesNetworkOutput) {
  const auto& kit = testing::small_kit();
  const SpectralBasis basis = truncate(kit.spectrum, 4);
  const int in = static_cast<int>(kit.model.n_identity() + 2 * kit.model.n_expression());
  const MlpParams p = mlp_init(std::vector<int>{in, 8, 12}, 2);
  const Eigen::VectorXd a = Eigen::VectorXd::Ones(kit.model.n_identity());
  const Eigen::VectorXd e = kit.model.neutral_expression();
  const DisplacementField d = predict_deformation(p, a, e, e, basis);
  const Eigen::VectorXd c = mlp_forward(p, shape_input(a, e, e));
  const DisplacementField expected = decode(basis, SpectralCoeffs{c});
  EXPECT_LE((d.vectors - expected.vectors).norm(), 1e-12);
  EXPECT_EQ(shape_input(a, e, 2.0 * e).tail(e.size()), 2.0 * e);
}

TEST(ShapeBranch, ParamsAndBasisRoundTrip) {
  MlpParams p = mlp_init(std::vector<int>{7, 5, 4}, 3);
  p.input_mean = Eigen::VectorXd::LinSpaced(7, 0.1, 0.7);
  p.input_scale = Eigen::VectorXd::LinSpaced(7, 1.0, 2.0);
  testing::TempDir dir("mlp");
  save_mlp(dir.path(), p, {{"note", "x"}});
  nlohmann::json meta;
  const MlpParams back = load_mlp(dir.path(), &meta);
  EXPECT_EQ(meta.at("note"), "x");
  ASSERT_EQ(back.dims(), p.dims());
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    EXPECT_LE((back.layers[l].weight - p.layers[l].weight).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_LE((back.layers[l].bias - p.layers[l].bias).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_EQ(back.layers[l].relu, p.layers[l].relu);
  }
  EXPECT_LE((back.input_mean - p.input_mean).cwiseAbs().maxCoeff(), 1e-13);

  const auto& kit = testing::small_kit();
  const SpectralBasis basis = truncate(kit.spectrum, 6);
  save_basis(dir / "basis", basis);
  const SpectralBasis b2 = load_basis(dir / "basis");
  EXPECT_EQ(b2.mesh_hash, basis.mesh_hash);
  EXPECT_LE((b2.vectors - basis.vectors).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LE((b2.eigenvalues - basis.eigenvalues).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(load_mlp(dir / "missing"), Error);
}

}  // namespace
}  // namespace morphfit

#include <benchmark/benchmark.h>

#include "morphfit/compositor.hpp"
#include "morphfit/fitting.hpp"
#include "morphfit/model.hpp"
#include "morphfit/pipeline.hpp"
#include "morphfit/raster.hpp"
#include "morphfit/shapenet.hpp"
#include "morphfit/spectral.hpp"
#include "morphfit/synthkit.hpp"

namespace {

using namespace morphfit;

const SyntheticKit& kit() {
  static const SyntheticKit k = make_synthetic(SyntheticSpec{});
  return k;
}

const Scene& scene() {
  static const Scene s = sample_scene(kit(), 5);
  return s;
}

void BM_Contraction(benchmark::State& state) {
  Rng rng(1);
  const Coefficients c = sample_coefficients(kit().spec, rng);
  for (auto _ : state) benchmark::DoNotOptimize(contract_bilinear(kit().model, c.identity, c.expression));
}
BENCHMARK(BM_Contraction);

void BM_ExpressionBasis(benchmark::State& state) {
  Rng rng(2);
  const Coefficients c = sample_coefficients(kit().spec, rng);
  for (auto _ : state) benchmark::DoNotOptimize(expression_basis(kit().model, c.identity));
}
BENCHMARK(BM_ExpressionBasis);

void BM_FitImage(benchmark::State& state) {
  FitConfig config;
  config.max_outer_iterations = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fit_image(kit().model, scene().landmarks, config));
}
BENCHMARK(BM_FitImage)->Arg(20)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_RasterizeScreen(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  CameraPose pose = scene().pose;
  pose.scale *= size / 256.0;
  pose.translation *= size / 256.0;
  for (auto _ : state) benchmark::DoNotOptimize(rasterize_screen(kit().model, scene().shape, pose, size, size));
}
BENCHMARK(BM_RasterizeScreen)->Arg(256)->Arg(512)->Unit(benchmark::kMicrosecond);

void BM_ExtractTexture(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(extract_texture(scene().image, scene().shape, scene().pose, kit().model, 256));
  }
}
BENCHMARK(BM_ExtractTexture)->Unit(benchmark::kMillisecond);

void BM_Dilate(benchmark::State& state) {
  const DistancePlane plane =
      vertex_distance_plane(kit().model, scene().shape, scene().shape, scene().pose, 256, 256);
  const int kernel = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(dilate(plane.coverage, kernel));
}
BENCHMARK(BM_Dilate)->Arg(3)->Arg(12)->Arg(32)->Unit(benchmark::kMicrosecond);

void BM_SpectralEncode(benchmark::State& state) {
  const SpectralBasis basis = truncate(kit().spectrum, state.range(0));
  Rng rng(3);
  const Coefficients c = sample_coefficients(kit().spec, rng);
  const DisplacementField field = kit().nonlinear.evaluate(c.identity, c.expression);
  for (auto _ : state) benchmark::DoNotOptimize(decode(basis, encode(basis, field)));
}
BENCHMARK(BM_SpectralEncode)->Arg(30)->Arg(100);

void BM_MlpGradient(benchmark::State& state) {
  const MlpParams params = mlp_init(std::vector<int>{142, 256, 256, 300}, 1);
  Rng rng(4);
  Eigen::MatrixXd x(142, 32), y(300, 32);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  for (Index i = 0; i < y.size(); ++i) y.data()[i] = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(mlp_gradient(params, x, y));
}
BENCHMARK(BM_MlpGradient)->Unit(benchmark::kMicrosecond);

void BM_Transfer(benchmark::State& state) {
  PipelineConfig config;
  config.fit.max_outer_iterations = 200;
  static const FitOutput fit = run_fit(kit().model, scene().image, scene().landmarks, nullptr, config);
  Eigen::VectorXd e = fit.fit.coeffs.expression;
  e[7] = 0.9;
  for (auto _ : state) benchmark::DoNotOptimize(run_transfer(kit().model, fit, e, nullptr, config));
}
BENCHMARK(BM_Transfer)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

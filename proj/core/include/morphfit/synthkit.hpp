#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "morphfit/fitting.hpp"
#include "morphfit/image.hpp"
#include "morphfit/model.hpp"
#include "morphfit/raster.hpp"
#include "morphfit/rng.hpp"
#include "morphfit/shapenet.hpp"
#include "morphfit/spectral.hpp"

namespace morphfit {

/// Parameters of a synthetic bilinear face model. Lengths are in millimeters.
struct SyntheticSpec {
  std::uint64_t seed = 1;
  Index n_vertices = 1220;
  Index n_identity = 50;
  Index n_expression = 46;
  Eigen::Vector3d semi_axes{75.0, 100.0, 60.0};
  /// Modes are drawn from the first `mode_band` Laplacian eigenvectors (clamped to N - 1) with
  /// spectral weights 1 / (1 + lambda / lambda_ref), lambda_ref = eigenvalue number `mode_knee`.
  Index mode_band = 150;
  Index mode_knee = 20;
  double identity_amplitude = 5.0;    // per-vertex RMS of one unit identity mode
  double expression_amplitude = 3.0;  // per-vertex RMS of one unit expression mode
  double coupling_amplitude = 0.5;    // per-vertex RMS of one coupling field
  int coupling_rank = 6;
  /// Nonlinear deformation used as shape-branch ground truth.
  double nonlinear_amplitude = 2.0;   // per-vertex RMS of one nonlinear field
  int nonlinear_terms = 8;
  Index nonlinear_band = 60;
  double nonlinear_gain = 2.0;        // std of the tanh pre-activations
  int landmark_count = 96;
  /// Sampling ranges for scenes.
  double identity_sigma = 0.3;
  double expression_max = 0.5;
};

void validate(const SyntheticSpec& spec);

/// G(a, e) = sum_m tanh(w_m . z(a, e) + b_m) F_m, where z standardizes the coefficients.
struct NonlinearDeformation {
  std::vector<Eigen::Matrix3Xd> fields;
  Eigen::MatrixXd weights;  // terms x (N_a + N_e)
  Eigen::VectorXd biases;
  Eigen::VectorXd input_center;
  Eigen::VectorXd input_scale;
  std::uint64_t mesh_hash = 0;

  bool empty() const { return fields.empty(); }
  DisplacementField evaluate(const Eigen::VectorXd& identity, const Eigen::VectorXd& expression) const;
  /// G(a, e_tgt) - G(a, e_src): the correction the shape branch learns.
  DisplacementField transfer(const Eigen::VectorXd& identity, const Eigen::VectorXd& e_src,
                             const Eigen::VectorXd& e_tgt) const;
};

struct SyntheticKit {
  SyntheticSpec spec;
  BilinearModel model;
  NonlinearDeformation nonlinear;
  /// Full combinatorial spectrum of the mesh (k = N - 1).
  SpectralBasis spectrum;
};

/// Grid dimensions used for N vertices: rows = largest divisor of N not above sqrt(N).
std::pair<int, int> grid_shape(Index n_vertices);

SyntheticKit make_synthetic(const SyntheticSpec& spec);
BilinearModel make_synthetic_model(const SyntheticSpec& spec);

/// Smooth color texture over the model's UV layout (valid exactly on UV coverage).
Texture procedural_texture(const BilinearModel& model, int resolution);

struct SceneOptions {
  int image_size = 256;
  double landmark_noise_px = 0.0;
  bool with_depth = false;
  int depth_samples = 2000;
  double depth_noise_mm = 0.0;
  bool with_nonlinear = false;
  double max_rotation_deg = 20.0;
  double background = 0.2;
  /// Overrides the sampled identity so several scenes can share one face.
  std::optional<Eigen::VectorXd> identity;
};

struct DepthSample {
  std::uint32_t triangle;
  Eigen::Vector3d bary;
};

struct Scene {
  CameraPose pose;
  Coefficients coeffs;
  Shape shape;                    // contract(a, e) plus the nonlinear field when enabled
  std::optional<DisplacementField> nonlinear;
  Image image;
  Mask coverage;
  Eigen::Matrix2Xd landmarks;     // pixels
  DepthCloud depth;               // model frame
  std::vector<DepthSample> depth_samples;
};

Scene sample_scene(const SyntheticKit& kit, std::uint64_t seed, const SceneOptions& options = {});

/// Truth coefficients: a = (1, N(0, sigma)...), e = (1, U(0, e_max)...).
Coefficients sample_coefficients(const SyntheticSpec& spec, Rng& rng);
Eigen::VectorXd sample_expression(const SyntheticSpec& spec, Rng& rng);

/// Root mean square per-vertex Euclidean distance.
double evaluate_rmse(const Shape& predicted, const Shape& truth);

struct BenchmarkConfig {
  int n_train = 400;
  int n_test = 50;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  Index k = 100;
  /// Per-axis Gaussian noise on the refined scans used as targets and as evaluation truth.
  double scan_noise_mm = 0.5;
  /// Optimizer settings follow the shape-branch defaults; inputs are standardized because the
  /// sampled coefficients span very different ranges.
  ShapeTrainConfig train = [] {
    ShapeTrainConfig c;
    c.standardize_inputs = true;
    return c;
  }();
};

struct BenchmarkSeed {
  std::uint64_t seed = 0;
  double rmse_without = 0.0;
  double rmse_with = 0.0;
  double final_train_loss = 0.0;
};

struct BenchmarkReport {
  std::vector<BenchmarkSeed> seeds;
  double mean_without = 0.0;
  double mean_with = 0.0;
  double improved_fraction = 0.0;
  double seconds = 0.0;
};

/// Training pairs for the shape branch: input concat(a, e_src, e_tgt), target the spectral
/// encoding of G(a, e_tgt) - G(a, e_src) with optional per-axis scan noise.
std::vector<ShapeSample> shape_training_samples(const SyntheticKit& kit, const SpectralBasis& basis,
                                               int count, double scan_noise_mm, Rng& rng);

/// Trains the shape branch per seed on synthetic (a, e_src, e_tgt) triples whose targets are the
/// spectral encodings of noisy G(a, e_tgt) - G(a, e_src), then reports held-out vertex RMSE of
/// the target shape with and without the predicted deformation.
BenchmarkReport benchmark_shape_branch(const SyntheticKit& kit, const SpectralBasis& basis,
                                       const BenchmarkConfig& config);

nlohmann::json to_json(const BenchmarkReport& report);
BenchmarkReport benchmark_report_from_json(const nlohmann::json& j);

}  // namespace morphfit

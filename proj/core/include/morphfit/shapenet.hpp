#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "morphfit/spectral.hpp"

namespace morphfit {

struct MlpLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
  bool relu = false;
};

/// Fully connected regressor. Hidden layers use ReLU, the output layer is linear.
/// When `input_mean` is non-empty, inputs are standardized as (x - mean) / scale first.
struct MlpParams {
  std::vector<MlpLayer> layers;
  Eigen::VectorXd input_mean;
  Eigen::VectorXd input_scale;

  Index input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
  Index output_dim() const { return layers.empty() ? 0 : layers.back().bias.size(); }
  std::vector<int> dims() const;
};

/// Throws kSizing when layer shapes do not chain or normalization vectors have the wrong size.
void validate(const MlpParams& params);

/// dims = {input, hidden..., output}. Weights ~ U(-r, r) with r = sqrt(3 / fan_in), so the
/// weight standard deviation is 1/sqrt(fan_in). Biases start at zero.
MlpParams mlp_init(std::span<const int> dims, std::uint64_t seed);

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& x);
/// Columns are samples.
Eigen::MatrixXd mlp_forward_batch(const MlpParams& params, const Eigen::MatrixXd& x);

struct MlpGradient {
  double loss = 0.0;
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;
};

/// Batch MSE, averaged over samples and outputs.
double mlp_loss(const MlpParams& params, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets);

/// Reverse-mode gradient of mlp_loss. ReLU'(0) = 0.
MlpGradient mlp_gradient(const MlpParams& params, const Eigen::MatrixXd& inputs,
                         const Eigen::MatrixXd& targets);

struct ShapeTrainConfig {
  std::vector<int> hidden{256, 256};
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double epsilon = 1e-8;
  int batch_size = 32;
  int epochs = 100;
  std::uint64_t seed = 0;
  double weight_decay = 0.0;
  bool standardize_inputs = false;
};

void validate(const ShapeTrainConfig& config);

struct ShapeSample {
  Eigen::VectorXd input;   // concat(a, e_src, e_tgt)
  Eigen::VectorXd target;  // spectral coefficients, length 3k
};

Eigen::VectorXd shape_input(const Eigen::VectorXd& identity, const Eigen::VectorXd& e_src,
                            const Eigen::VectorXd& e_tgt);

struct ShapeTrainResult {
  MlpParams params;
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;  // full-dataset MSE after each epoch
};

/// Adam on minibatches with a seeded shuffle per epoch. Throws kNumerical on a non-finite loss.
ShapeTrainResult train_shape_branch(std::span<const ShapeSample> samples,
                                    const ShapeTrainConfig& config);

/// decode(basis, mlp_forward(params, concat(a, e_src, e_tgt))).
DisplacementField predict_deformation(const MlpParams& params, const Eigen::VectorXd& identity,
                                      const Eigen::VectorXd& e_src, const Eigen::VectorXd& e_tgt,
                                      const SpectralBasis& basis);

/// Bundle persistence; `meta` is stored alongside (seeds, loss history, ...).
void save_mlp(const std::filesystem::path& directory, const MlpParams& params,
              const nlohmann::json& meta = nlohmann::json::object());
MlpParams load_mlp(const std::filesystem::path& directory, nlohmann::json* meta = nullptr);

void save_basis(const std::filesystem::path& directory, const SpectralBasis& basis);
SpectralBasis load_basis(const std::filesystem::path& directory);

}  // namespace morphfit

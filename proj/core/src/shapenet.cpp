#include "morphfit/shapenet.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "morphfit/bundle.hpp"
#include "morphfit/error.hpp"
#include "morphfit/rng.hpp"

namespace morphfit {
namespace {

Eigen::MatrixXd standardize(const MlpParams& params, const Eigen::MatrixXd& x) {
  if (params.input_mean.size() == 0) return x;
  return (x.colwise() - params.input_mean).array().colwise() / params.input_scale.array();
}

void check_batch(const MlpParams& params, const Eigen::MatrixXd& inputs,
                 const Eigen::MatrixXd& targets) {
  validate(params);
  if (inputs.cols() == 0) fail(ErrorCode::kInvalidArgument, "empty batch");
  if (inputs.rows() != params.input_dim() || targets.rows() != params.output_dim() ||
      targets.cols() != inputs.cols()) {
    fail(ErrorCode::kSizing, "batch is " + std::to_string(inputs.rows()) + "x" +
                                 std::to_string(inputs.cols()) + " -> " +
                                 std::to_string(targets.rows()) + "x" + std::to_string(targets.cols()) +
                                 ", network maps " + std::to_string(params.input_dim()) + " -> " +
                                 std::to_string(params.output_dim()));
  }
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

std::vector<int> MlpParams::dims() const {
  std::vector<int> d;
  if (layers.empty()) return d;
  d.push_back(static_cast<int>(layers.front().weight.cols()));
  for (const auto& l : layers) d.push_back(static_cast<int>(l.weight.rows()));
  return d;
}

void validate(const MlpParams& params) {
  if (params.layers.empty()) fail(ErrorCode::kSizing, "network has no layers");
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& l = params.layers[i];
    if (l.weight.rows() == 0 || l.weight.cols() == 0 || l.bias.size() != l.weight.rows()) {
      fail(ErrorCode::kSizing, "layer " + std::to_string(i) + " has inconsistent shape");
    }
    if (i > 0 && l.weight.cols() != params.layers[i - 1].weight.rows()) {
      fail(ErrorCode::kSizing, "layer " + std::to_string(i) + " expects " +
                                   std::to_string(l.weight.cols()) + " inputs but layer " +
                                   std::to_string(i - 1) + " produces " +
                                   std::to_string(params.layers[i - 1].weight.rows()));
    }
  }
  if (params.input_mean.size() != 0 && (params.input_mean.size() != params.input_dim() ||
                                        params.input_scale.size() != params.input_dim())) {
    fail(ErrorCode::kSizing, "input normalization does not match the input dimension");
  }
}

MlpParams mlp_init(std::span<const int> dims, std::uint64_t seed) {
  if (dims.size() < 2) fail(ErrorCode::kSizing, "need at least input and output dimensions");
  for (int d : dims) {
    if (d <= 0) fail(ErrorCode::kSizing, "layer widths must be positive");
  }
  Rng rng(seed);
  MlpParams params;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    MlpLayer layer;
    const double r = std::sqrt(3.0 / dims[i]);
    layer.weight.resize(dims[i + 1], dims[i]);
    // Row-major fill order keeps the stream layout independent of Eigen's storage order.
    for (Index row = 0; row < layer.weight.rows(); ++row) {
      for (Index col = 0; col < layer.weight.cols(); ++col) layer.weight(row, col) = rng.uniform(-r, r);
    }
    layer.bias = Eigen::VectorXd::Zero(dims[i + 1]);
    layer.relu = i + 2 < dims.size();
    params.layers.push_back(std::move(layer));
  }
  return params;
}

Eigen::MatrixXd mlp_forward_batch(const MlpParams& params, const Eigen::MatrixXd& x) {
  validate(params);
  if (x.rows() != params.input_dim()) {
    fail(ErrorCode::kSizing, "input has " + std::to_string(x.rows()) + " entries, network expects " +
                                 std::to_string(params.input_dim()));
  }
  Eigen::MatrixXd h = standardize(params, x);
  for (const auto& l : params.layers) {
    h = (l.weight * h).colwise() + l.bias;
    if (l.relu) h = h.cwiseMax(0.0);
  }
  return h;
}

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& x) {
  return mlp_forward_batch(params, x);
}

double mlp_loss(const MlpParams& params, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) {
  check_batch(params, inputs, targets);
  const Eigen::MatrixXd y = mlp_forward_batch(params, inputs);
  return (y - targets).squaredNorm() / static_cast<double>(targets.size());
}

MlpGradient mlp_gradient(const MlpParams& params, const Eigen::MatrixXd& inputs,
                         const Eigen::MatrixXd& targets) {
  check_batch(params, inputs, targets);
  const std::size_t n_layers = params.layers.size();
  // activations[i] is the input of layer i; activations[n] is the output.
  std::vector<Eigen::MatrixXd> activations(n_layers + 1);
  activations[0] = standardize(params, inputs);
  for (std::size_t i = 0; i < n_layers; ++i) {
    const auto& l = params.layers[i];
    Eigen::MatrixXd z = (l.weight * activations[i]).colwise() + l.bias;
    if (l.relu) z = z.cwiseMax(0.0);
    activations[i + 1] = std::move(z);
  }
  const Eigen::MatrixXd residual = activations[n_layers] - targets;
  const double count = static_cast<double>(targets.size());

  MlpGradient grad;
  grad.loss = residual.squaredNorm() / count;
  grad.weight.resize(n_layers);
  grad.bias.resize(n_layers);
  Eigen::MatrixXd delta = (2.0 / count) * residual;
  for (std::size_t i = n_layers; i-- > 0;) {
    const auto& l = params.layers[i];
    if (l.relu) {
      // Post-activation output is zero exactly where the pre-activation was <= 0.
      delta = delta.cwiseProduct((activations[i + 1].array() > 0.0).cast<double>().matrix());
    }
    grad.weight[i] = delta * activations[i].transpose();
    grad.bias[i] = delta.rowwise().sum();
    if (i > 0) delta = l.weight.transpose() * delta;
  }
  return grad;
}

void validate(const ShapeTrainConfig& config) {
  if (!(config.learning_rate > 0.0)) fail(ErrorCode::kInvalidArgument, "learning_rate must be > 0");
  if (!(config.beta1 > 0.0 && config.beta1 < 1.0) || !(config.beta2 > 0.0 && config.beta2 < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "Adam betas must lie in (0, 1)");
  }
  if (!(config.epsilon > 0.0)) fail(ErrorCode::kInvalidArgument, "epsilon must be > 0");
  if (config.batch_size < 1 || config.epochs < 0) {
    fail(ErrorCode::kInvalidArgument, "batch_size must be >= 1 and epochs >= 0");
  }
  if (config.weight_decay < 0.0) fail(ErrorCode::kInvalidArgument, "weight_decay must be >= 0");
  for (int w : config.hidden) {
    if (w <= 0) fail(ErrorCode::kInvalidArgument, "hidden widths must be positive");
  }
}

Eigen::VectorXd shape_input(const Eigen::VectorXd& identity, const Eigen::VectorXd& e_src,
                            const Eigen::VectorXd& e_tgt) {
  Eigen::VectorXd x(identity.size() + e_src.size() + e_tgt.size());
  x << identity, e_src, e_tgt;
  return x;
}

ShapeTrainResult train_shape_branch(std::span<const ShapeSample> samples,
                                    const ShapeTrainConfig& config) {
  validate(config);
  if (samples.empty()) fail(ErrorCode::kInvalidArgument, "training needs at least one sample");
  const Index in_dim = samples.front().input.size();
  const Index out_dim = samples.front().target.size();
  const Index n = static_cast<Index>(samples.size());
  Eigen::MatrixXd inputs(in_dim, n);
  Eigen::MatrixXd targets(out_dim, n);
  for (Index s = 0; s < n; ++s) {
    const auto& sample = samples[static_cast<std::size_t>(s)];
    if (sample.input.size() != in_dim || sample.target.size() != out_dim) {
      fail(ErrorCode::kSizing, "sample " + std::to_string(s) + " has inconsistent dimensions");
    }
    inputs.col(s) = sample.input;
    targets.col(s) = sample.target;
  }

  std::vector<int> dims;
  dims.push_back(static_cast<int>(in_dim));
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(static_cast<int>(out_dim));
  ShapeTrainResult result;
  result.params = mlp_init(dims, config.seed);
  MlpParams& params = result.params;
  if (config.standardize_inputs) {
    params.input_mean = inputs.rowwise().mean();
    const Eigen::MatrixXd centered = inputs.colwise() - params.input_mean;
    params.input_scale = (centered.rowwise().squaredNorm() / static_cast<double>(n)).cwiseSqrt();
    for (Index i = 0; i < in_dim; ++i) {
      if (!(params.input_scale[i] > 1e-12)) params.input_scale[i] = 1.0;
    }
  }

  const std::size_t n_layers = params.layers.size();
  std::vector<Eigen::MatrixXd> m_w(n_layers), v_w(n_layers);
  std::vector<Eigen::VectorXd> m_b(n_layers), v_b(n_layers);
  for (std::size_t i = 0; i < n_layers; ++i) {
    m_w[i] = v_w[i] = Eigen::MatrixXd::Zero(params.layers[i].weight.rows(), params.layers[i].weight.cols());
    m_b[i] = v_b[i] = Eigen::VectorXd::Zero(params.layers[i].bias.size());
  }

  result.initial_loss = mlp_loss(params, inputs, targets);
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  long step = 0;
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
    }
    for (Index start = 0; start < n; start += config.batch_size) {
      const Index count = std::min<Index>(config.batch_size, n - start);
      Eigen::MatrixXd bx(in_dim, count);
      Eigen::MatrixXd by(out_dim, count);
      for (Index j = 0; j < count; ++j) {
        bx.col(j) = inputs.col(order[static_cast<std::size_t>(start + j)]);
        by.col(j) = targets.col(order[static_cast<std::size_t>(start + j)]);
      }
      const MlpGradient g = mlp_gradient(params, bx, by);
      if (!std::isfinite(g.loss)) {
        fail(ErrorCode::kNumerical, "non-finite training loss at epoch " + std::to_string(epoch) +
                                        ", batch starting at " + std::to_string(start) +
                                        " (learning rate " + std::to_string(config.learning_rate) + ")");
      }
      ++step;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
      const double lr = config.learning_rate;
      const double eps = config.epsilon;
      for (std::size_t i = 0; i < n_layers; ++i) {
        auto& layer = params.layers[i];
        Eigen::MatrixXd gw = g.weight[i];
        if (config.weight_decay > 0.0) gw += config.weight_decay * layer.weight;
        m_w[i] = b1 * m_w[i] + (1.0 - b1) * gw;
        v_w[i] = b2 * v_w[i] + (1.0 - b2) * gw.cwiseAbs2();
        layer.weight.array() -=
            lr * (m_w[i].array() / c1) / ((v_w[i].array() / c2).sqrt() + eps);
        m_b[i] = b1 * m_b[i] + (1.0 - b1) * g.bias[i];
        v_b[i] = b2 * v_b[i] + (1.0 - b2) * g.bias[i].cwiseAbs2();
        layer.bias.array() -= lr * (m_b[i].array() / c1) / ((v_b[i].array() / c2).sqrt() + eps);
      }
    }
    const double loss = mlp_loss(params, inputs, targets);
    if (!std::isfinite(loss)) {
      fail(ErrorCode::kNumerical, "non-finite training loss after epoch " + std::to_string(epoch));
    }
    result.epoch_loss.push_back(loss);
  }
  return result;
}

DisplacementField predict_deformation(const MlpParams& params, const Eigen::VectorXd& identity,
                                      const Eigen::VectorXd& e_src, const Eigen::VectorXd& e_tgt,
                                      const SpectralBasis& basis) {
  if (params.output_dim() != 3 * basis.k()) {
    fail(ErrorCode::kSizing, "network outputs " + std::to_string(params.output_dim()) +
                                 " coefficients, basis needs " + std::to_string(3 * basis.k()));
  }
  SpectralCoeffs coeffs{mlp_forward(params, shape_input(identity, e_src, e_tgt))};
  return decode(basis, coeffs);
}

void save_mlp(const std::filesystem::path& directory, const MlpParams& params,
              const nlohmann::json& meta) {
  validate(params);
  Bundle bundle;
  bundle.kind = "mlp-params";
  std::vector<bool> relu;
  for (const auto& l : params.layers) relu.push_back(l.relu);
  bundle.meta = {{"dims", params.dims()},
                 {"relu", relu},
                 {"input_mean", to_vector(params.input_mean)},
                 {"input_scale", to_vector(params.input_scale)},
                 {"extra", meta}};
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& l = params.layers[i];
    bundle.planes.push_back({"w" + std::to_string(i), matrix_plane(l.weight), true});
    bundle.planes.push_back({"b" + std::to_string(i), matrix_plane(l.bias), true});
  }
  write_bundle(directory, bundle);
}

MlpParams load_mlp(const std::filesystem::path& directory, nlohmann::json* meta) {
  const Bundle bundle = read_bundle(directory);
  if (bundle.kind != "mlp-params") fail(ErrorCode::kMalformed, directory.string() + " is not an MLP bundle");
  MlpParams params;
  try {
    const auto dims = bundle.meta.at("dims").get<std::vector<int>>();
    const auto relu = bundle.meta.at("relu").get<std::vector<bool>>();
    if (dims.size() < 2 || relu.size() + 1 != dims.size()) {
      fail(ErrorCode::kMalformed, "MLP manifest dims and activations disagree");
    }
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      MlpLayer layer;
      layer.weight = plane_matrix(bundle.plane("w" + std::to_string(i)).values);
      layer.bias = plane_matrix(bundle.plane("b" + std::to_string(i)).values).col(0);
      layer.relu = relu[i];
      params.layers.push_back(std::move(layer));
    }
    params.input_mean = from_vector(bundle.meta.at("input_mean").get<std::vector<double>>());
    params.input_scale = from_vector(bundle.meta.at("input_scale").get<std::vector<double>>());
    if (meta != nullptr) *meta = bundle.meta.at("extra");
    if (params.dims() != dims) fail(ErrorCode::kMalformed, "MLP planes disagree with manifest dims");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kMalformed, std::string("MLP manifest: ") + e.what());
  }
  validate(params);
  return params;
}

void save_basis(const std::filesystem::path& directory, const SpectralBasis& basis) {
  Bundle bundle;
  bundle.kind = "spectral-basis";
  bundle.meta = {{"k", basis.k()},
                 {"n_vertices", basis.n_vertices()},
                 {"mesh_hash", basis.mesh_hash}};
  bundle.planes.push_back({"eigenvalues", matrix_plane(basis.eigenvalues), true});
  bundle.planes.push_back({"vectors", matrix_plane(basis.vectors), true});
  write_bundle(directory, bundle);
}

SpectralBasis load_basis(const std::filesystem::path& directory) {
  const Bundle bundle = read_bundle(directory);
  if (bundle.kind != "spectral-basis") {
    fail(ErrorCode::kMalformed, directory.string() + " is not a spectral basis bundle");
  }
  SpectralBasis basis;
  try {
    basis.mesh_hash = bundle.meta.at("mesh_hash").get<std::uint64_t>();
    basis.eigenvalues = plane_matrix(bundle.plane("eigenvalues").values).col(0);
    basis.vectors = plane_matrix(bundle.plane("vectors").values);
    if (basis.k() != bundle.meta.at("k").get<Index>() ||
        basis.n_vertices() != bundle.meta.at("n_vertices").get<Index>() ||
        basis.eigenvalues.size() != basis.k()) {
      fail(ErrorCode::kMalformed, "basis planes disagree with the manifest");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kMalformed, std::string("basis manifest: ") + e.what());
  }
  return basis;
}

}  // namespace morphfit

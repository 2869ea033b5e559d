#include "morphfit/synthkit.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Geometry>
#include <Eigen/QR>

#include "morphfit/error.hpp"
#include "morphfit/mesh.hpp"

namespace morphfit {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Grid {
  int rows;
  int cols;
  Index id(int r, int c) const { return static_cast<Index>(r) * cols + c; }
};

// Ellipsoid front patch: longitude +-70 deg across columns, latitude +-55 deg down the rows.
// The patch bulges toward -z (the viewer) and y points down, matching image axes.
Eigen::VectorXd base_positions(const Grid& g, const Eigen::Vector3d& axes) {
  Eigen::VectorXd p(3 * static_cast<Index>(g.rows) * g.cols);
  for (int r = 0; r < g.rows; ++r) {
    const double lat = (-55.0 + 110.0 * r / (g.rows - 1)) * kDeg;
    for (int c = 0; c < g.cols; ++c) {
      const double lon = (-70.0 + 140.0 * c / (g.cols - 1)) * kDeg;
      const Index v = g.id(r, c);
      p[3 * v + 0] = axes.x() * std::sin(lon) * std::cos(lat);
      p[3 * v + 1] = axes.y() * std::sin(lat);
      p[3 * v + 2] = -axes.z() * std::cos(lon) * std::cos(lat);
    }
  }
  return p;
}

std::vector<Triangle> grid_topology(const Grid& g) {
  std::vector<Triangle> tris;
  tris.reserve(static_cast<std::size_t>(2 * (g.rows - 1) * (g.cols - 1)));
  for (int r = 0; r + 1 < g.rows; ++r) {
    for (int c = 0; c + 1 < g.cols; ++c) {
      const auto v00 = static_cast<std::uint32_t>(g.id(r, c));
      const auto v01 = static_cast<std::uint32_t>(g.id(r, c + 1));
      const auto v10 = static_cast<std::uint32_t>(g.id(r + 1, c));
      const auto v11 = static_cast<std::uint32_t>(g.id(r + 1, c + 1));
      // Wound so the outward normal points at the viewer (-z).
      tris.push_back({v00, v10, v01});
      tris.push_back({v01, v10, v11});
    }
  }
  return tris;
}

bool inside_ellipse(const Eigen::Vector2d& uv, double cu, double cv, double ru, double rv) {
  const double du = (uv.x() - cu) / ru;
  const double dv = (uv.y() - cv) / rv;
  return du * du + dv * dv <= 1.0;
}

SemanticLabel region_for(const Eigen::Vector2d& uv) {
  if (inside_ellipse(uv, 0.5, 0.74, 0.09, 0.025)) return SemanticLabel::kInnerMouth;
  if (inside_ellipse(uv, 0.5, 0.74, 0.15, 0.06)) return SemanticLabel::kLips;
  if (inside_ellipse(uv, 0.34, 0.38, 0.08, 0.045) || inside_ellipse(uv, 0.66, 0.38, 0.08, 0.045)) {
    return SemanticLabel::kEyes;
  }
  if (inside_ellipse(uv, 0.34, 0.27, 0.1, 0.03) || inside_ellipse(uv, 0.66, 0.27, 0.1, 0.03)) {
    return SemanticLabel::kEyebrows;
  }
  if (inside_ellipse(uv, 0.5, 0.52, 0.06, 0.11)) return SemanticLabel::kNose;
  return SemanticLabel::kOther;
}

// 3N interleaved vector <-> 3 x N field.
Eigen::VectorXd flatten(const Eigen::Matrix3Xd& f) {
  return Eigen::Map<const Eigen::VectorXd>(f.data(), f.size());
}

Eigen::Matrix3Xd band_projection(const Eigen::MatrixXd& band, const Eigen::Matrix3Xd& f) {
  return (band * (band.transpose() * f.transpose())).transpose();
}

// Random smooth field from the first columns of the spectrum with weights 1/(1 + lambda/ref).
Eigen::Matrix3Xd smooth_field(const SpectralBasis& spectrum, Index band, double lambda_ref, Rng& rng) {
  Eigen::MatrixXd coeffs(band, 3);
  for (Index i = 0; i < band; ++i) {
    const double w = 1.0 / (1.0 + spectrum.eigenvalues[i] / lambda_ref);
    for (int a = 0; a < 3; ++a) coeffs(i, a) = w * rng.normal();
  }
  return (spectrum.vectors.leftCols(band) * coeffs).transpose();
}

// Scales a field to the given per-vertex RMS magnitude.
Eigen::Matrix3Xd with_rms(const Eigen::Matrix3Xd& f, double rms) {
  const double current = std::sqrt(f.squaredNorm() / static_cast<double>(f.cols()));
  if (current == 0.0) return f;
  return f * (rms / current);
}

}  // namespace

void validate(const SyntheticSpec& spec) {
  if (spec.n_vertices < 4) fail(ErrorCode::kInvalidArgument, "synthetic models need N >= 4");
  if (spec.n_identity < 1 || spec.n_expression < 1) {
    fail(ErrorCode::kInvalidArgument, "N_a and N_e must be >= 1");
  }
  const double amps[] = {spec.identity_amplitude, spec.expression_amplitude, spec.coupling_amplitude,
                         spec.nonlinear_amplitude, spec.nonlinear_gain, spec.identity_sigma,
                         spec.expression_max};
  for (double a : amps) {
    if (!(a >= 0.0) || !std::isfinite(a)) fail(ErrorCode::kInvalidArgument, "amplitudes must be >= 0");
  }
  if (spec.expression_max > 1.0) fail(ErrorCode::kInvalidArgument, "expression_max must be <= 1");
  if ((spec.semi_axes.array() <= 0.0).any()) fail(ErrorCode::kInvalidArgument, "semi axes must be > 0");
  if (spec.mode_band < 1 || spec.mode_knee < 1 || spec.nonlinear_band < 1 ||
      spec.coupling_rank < 0 || spec.nonlinear_terms < 0) {
    fail(ErrorCode::kInvalidArgument, "band sizes must be positive");
  }
  if (spec.landmark_count < 4 || spec.landmark_count > spec.n_vertices) {
    fail(ErrorCode::kInvalidArgument, "landmark_count must lie in [4, N]");
  }
}

std::pair<int, int> grid_shape(Index n_vertices) {
  int rows = 1;
  for (Index r = 1; r * r <= n_vertices; ++r) {
    if (n_vertices % r == 0) rows = static_cast<int>(r);
  }
  if (rows < 2) {
    fail(ErrorCode::kSizing, "N = " + std::to_string(n_vertices) +
                                 " does not factor into a grid with at least two rows");
  }
  return {rows, static_cast<int>(n_vertices / rows)};
}

DisplacementField NonlinearDeformation::evaluate(const Eigen::VectorXd& identity,
                                                 const Eigen::VectorXd& expression) const {
  DisplacementField out;
  out.mesh_hash = mesh_hash;
  if (fields.empty()) return out;
  if (identity.size() + expression.size() != weights.cols()) {
    fail(ErrorCode::kSizing, "coefficient lengths do not match the nonlinear deformation");
  }
  Eigen::VectorXd z(weights.cols());
  z << identity, expression;
  z = (z - input_center).cwiseQuotient(input_scale);
  const Eigen::VectorXd act = ((weights * z) + biases).array().tanh();
  out.vectors = Eigen::Matrix3Xd::Zero(3, fields.front().cols());
  for (std::size_t m = 0; m < fields.size(); ++m) out.vectors += act[static_cast<Index>(m)] * fields[m];
  return out;
}

DisplacementField NonlinearDeformation::transfer(const Eigen::VectorXd& identity,
                                                 const Eigen::VectorXd& e_src,
                                                 const Eigen::VectorXd& e_tgt) const {
  DisplacementField out = evaluate(identity, e_tgt);
  if (!fields.empty()) out.vectors -= evaluate(identity, e_src).vectors;
  return out;
}

SyntheticKit make_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  const auto [rows, cols] = grid_shape(spec.n_vertices);
  const Grid grid{rows, cols};
  const Index n = spec.n_vertices;
  const Index na = spec.n_identity;
  const Index ne = spec.n_expression;

  std::vector<Triangle> topology = grid_topology(grid);
  std::vector<Eigen::Vector2d> uv(static_cast<std::size_t>(n));
  std::vector<std::uint8_t> semantic(static_cast<std::size_t>(n));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const auto v = static_cast<std::size_t>(grid.id(r, c));
      uv[v] = {static_cast<double>(c) / (cols - 1), static_cast<double>(r) / (rows - 1)};
      semantic[v] = static_cast<std::uint8_t>(region_for(uv[v]));
    }
  }
  std::vector<std::uint32_t> landmarks(static_cast<std::size_t>(spec.landmark_count));
  for (int l = 0; l < spec.landmark_count; ++l) {
    landmarks[static_cast<std::size_t>(l)] = static_cast<std::uint32_t>(
        std::llround(static_cast<double>(l) * static_cast<double>(n - 1) / (spec.landmark_count - 1)));
  }

  SyntheticKit kit;
  kit.spec = spec;
  const std::uint64_t hash = mesh_hash(topology, n);
  kit.spectrum = eigenbasis(graph_laplacian(topology, n), n - 1, hash);
  const Index band = std::min(spec.mode_band, n - 1);
  const double lambda_ref = kit.spectrum.eigenvalues[std::min(spec.mode_knee, n - 1) - 1];
  const Eigen::MatrixXd band_vectors = kit.spectrum.vectors.leftCols(band);

  const Eigen::VectorXd base = base_positions(grid, spec.semi_axes);
  const Eigen::Map<const Eigen::Matrix3Xd> base_field(base.data(), 3, n);
  const Eigen::Vector3d centroid = base_field.rowwise().mean();
  const Eigen::Matrix3Xd centered = base_field.colwise() - centroid;

  // Gauge directions (infinitesimal rotations and uniform scaling about the centroid), restricted
  // to the mode band so the modes stay band-limited after being made orthogonal to them.
  const Index n_modes = (na - 1) + (ne - 1);
  const Index n_gauge = 4;
  if (3 * band < n_modes + n_gauge) {
    fail(ErrorCode::kSizing, "mode band of " + std::to_string(band) + " eigenvectors cannot hold " +
                                 std::to_string(n_modes) + " independent modes");
  }
  Eigen::MatrixXd stack(3 * n, n_gauge + n_modes);
  for (int axis = 0; axis < 3; ++axis) {
    Eigen::Matrix3Xd rot(3, n);
    const Eigen::Vector3d omega = Eigen::Vector3d::Unit(axis);
    for (Index v = 0; v < n; ++v) rot.col(v) = omega.cross(Eigen::Vector3d(centered.col(v)));
    stack.col(axis) = flatten(band_projection(band_vectors, rot));
  }
  stack.col(3) = flatten(band_projection(band_vectors, centered));

  Rng rng(spec.seed);
  for (Index m = 0; m < n_modes; ++m) {
    stack.col(n_gauge + m) = flatten(smooth_field(kit.spectrum, band, lambda_ref, rng));
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(stack);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(3 * n, stack.cols());
  const double unit_rms = std::sqrt(static_cast<double>(n));

  std::vector<double> tensor(static_cast<std::size_t>(3 * n * na * ne), 0.0);
  auto slice = [&](Index i, Index j) {
    return Eigen::Map<Eigen::VectorXd>(tensor.data() + ((i * ne) + j) * 3 * n, 3 * n);
  };
  slice(0, 0) = base;
  for (Index i = 1; i < na; ++i) {
    slice(i, 0) = q.col(n_gauge + (i - 1)) * (unit_rms * spec.identity_amplitude);
  }
  for (Index j = 1; j < ne; ++j) {
    slice(0, j) = q.col(n_gauge + (na - 1) + (j - 1)) * (unit_rms * spec.expression_amplitude);
  }
  if (spec.coupling_rank > 0 && na > 1 && ne > 1) {
    std::vector<Eigen::VectorXd> coupling;
    for (int r = 0; r < spec.coupling_rank; ++r) {
      coupling.push_back(flatten(with_rms(smooth_field(kit.spectrum, band, lambda_ref, rng),
                                          spec.coupling_amplitude)));
    }
    const double norm = 1.0 / std::sqrt(static_cast<double>(spec.coupling_rank));
    Eigen::MatrixXd alpha(na - 1, spec.coupling_rank);
    Eigen::MatrixXd beta(ne - 1, spec.coupling_rank);
    for (Index i = 0; i < alpha.size(); ++i) alpha.data()[i] = rng.normal() * norm;
    for (Index i = 0; i < beta.size(); ++i) beta.data()[i] = rng.normal();
    for (Index i = 1; i < na; ++i) {
      for (Index j = 1; j < ne; ++j) {
        auto s = slice(i, j);
        for (int r = 0; r < spec.coupling_rank; ++r) s += (alpha(i - 1, r) * beta(j - 1, r)) * coupling[static_cast<std::size_t>(r)];
      }
    }
  }

  Eigen::VectorXd neutral = Eigen::VectorXd::Zero(ne);
  neutral[0] = 1.0;
  kit.model = BilinearModel(n, na, ne, std::move(tensor), std::move(topology), std::move(uv),
                            std::move(semantic), std::move(landmarks), neutral);

  // Nonlinear deformation fields and their coefficient-space gates.
  NonlinearDeformation& g = kit.nonlinear;
  g.mesh_hash = hash;
  const Index nl_band = std::min(spec.nonlinear_band, n - 1);
  for (int m = 0; m < spec.nonlinear_terms; ++m) {
    g.fields.push_back(with_rms(smooth_field(kit.spectrum, nl_band, lambda_ref, rng),
                                spec.nonlinear_amplitude));
  }
  const Index dim = na + ne;
  g.input_center = Eigen::VectorXd::Zero(dim);
  g.input_scale = Eigen::VectorXd::Ones(dim);
  g.input_center[0] = 1.0;
  g.input_center[na] = 1.0;
  for (Index i = 1; i < na; ++i) g.input_scale[i] = spec.identity_sigma > 0.0 ? spec.identity_sigma : 1.0;
  for (Index j = 1; j < ne; ++j) {
    g.input_center[na + j] = 0.5 * spec.expression_max;
    g.input_scale[na + j] = spec.expression_max > 0.0 ? spec.expression_max / std::sqrt(12.0) : 1.0;
  }
  g.weights = Eigen::MatrixXd::Zero(spec.nonlinear_terms, dim);
  g.biases = Eigen::VectorXd::Zero(spec.nonlinear_terms);
  const double active = static_cast<double>(std::max<Index>(1, dim - 2));
  for (int m = 0; m < spec.nonlinear_terms; ++m) {
    for (Index d = 0; d < dim; ++d) {
      if (d == 0 || d == na) continue;  // constant reference components
      g.weights(m, d) = rng.normal() * spec.nonlinear_gain / std::sqrt(active);
    }
    g.biases[m] = rng.uniform(-1.0, 1.0);
  }
  return kit;
}

BilinearModel make_synthetic_model(const SyntheticSpec& spec) { return make_synthetic(spec).model; }

Texture procedural_texture(const BilinearModel& model, int resolution) {
  const UvLayout layout = uv_layout(model, resolution);
  Texture tex{Image(resolution, resolution, 3), layout.coverage};
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (int y = 0; y < resolution; ++y) {
    for (int x = 0; x < resolution; ++x) {
      if (!layout.coverage.at(x, y)) continue;
      const double u = (x + 0.5) / resolution;
      const double v = (y + 0.5) / resolution;
      tex.image.at(x, y, 0) = 0.55 + 0.25 * std::sin(two_pi * (1.5 * u + 0.3)) * std::cos(two_pi * v);
      tex.image.at(x, y, 1) = 0.45 + 0.2 * std::cos(two_pi * (u - 0.7 * v));
      tex.image.at(x, y, 2) = 0.4 + 0.2 * std::sin(two_pi * (2.0 * v + 0.5 * u));
    }
  }
  return tex;
}

Coefficients sample_coefficients(const SyntheticSpec& spec, Rng& rng) {
  Coefficients c;
  c.identity = Eigen::VectorXd::Zero(spec.n_identity);
  c.identity[0] = 1.0;
  for (Index i = 1; i < spec.n_identity; ++i) c.identity[i] = spec.identity_sigma * rng.normal();
  c.expression = sample_expression(spec, rng);
  return c;
}

Eigen::VectorXd sample_expression(const SyntheticSpec& spec, Rng& rng) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(spec.n_expression);
  e[0] = 1.0;
  for (Index j = 1; j < spec.n_expression; ++j) e[j] = rng.uniform(0.0, spec.expression_max);
  return e;
}

Scene sample_scene(const SyntheticKit& kit, std::uint64_t seed, const SceneOptions& options) {
  if (options.image_size < 8) fail(ErrorCode::kInvalidArgument, "image_size must be >= 8");
  const BilinearModel& model = kit.model;
  Rng rng(seed);
  Scene scene;
  scene.coeffs = sample_coefficients(kit.spec, rng);
  if (options.identity) {
    if (options.identity->size() != model.n_identity()) {
      fail(ErrorCode::kSizing, "scene identity has the wrong length");
    }
    scene.coeffs.identity = *options.identity;
  }

  const double max_rot = options.max_rotation_deg * kDeg;
  const double yaw = rng.uniform(-max_rot, max_rot);
  const double pitch = rng.uniform(-max_rot, max_rot);
  const double roll = rng.uniform(-0.5 * max_rot, 0.5 * max_rot);
  scene.pose.rotation = (Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitZ()) *
                         Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitX()) *
                         Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitY()))
                            .toRotationMatrix();

  scene.shape = contract_bilinear(model, scene.coeffs);
  if (options.with_nonlinear && !kit.nonlinear.empty()) {
    scene.nonlinear = kit.nonlinear.evaluate(scene.coeffs.identity, scene.coeffs.expression);
    scene.shape.matrix() += scene.nonlinear->vectors;
  }

  // Scale and center the face inside the frame.
  const Eigen::Matrix2Xd flat = scene.pose.rotation.topRows<2>() * scene.shape.matrix();
  const Eigen::Vector2d lo = flat.rowwise().minCoeff();
  const Eigen::Vector2d hi = flat.rowwise().maxCoeff();
  const double size = options.image_size;
  scene.pose.scale = 0.8 * size / (hi - lo).maxCoeff();
  const Eigen::Vector2d jitter(rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0));
  scene.pose.translation = Eigen::Vector2d::Constant(0.5 * size) - scene.pose.scale * 0.5 * (lo + hi) + jitter;

  const Texture texture = procedural_texture(model, 256);
  const RenderResult rendered = render(scene.shape, texture, scene.pose, model, options.image_size,
                                       options.image_size);
  scene.image = Image(options.image_size, options.image_size, 3, options.background);
  scene.coverage = rendered.coverage;
  for (int y = 0; y < options.image_size; ++y) {
    for (int x = 0; x < options.image_size; ++x) {
      if (!rendered.coverage.at(x, y)) continue;
      for (int c = 0; c < 3; ++c) scene.image.at(x, y, c) = rendered.image.at(x, y, c);
    }
  }

  const Eigen::Matrix2Xd projected = project(scene.pose, scene.shape);
  scene.landmarks.resize(2, model.landmark_count());
  for (Index l = 0; l < model.landmark_count(); ++l) {
    scene.landmarks.col(l) = projected.col(model.landmark_indices()[static_cast<std::size_t>(l)]);
  }
  if (options.landmark_noise_px > 0.0) {
    for (Index i = 0; i < scene.landmarks.size(); ++i) {
      scene.landmarks.data()[i] += options.landmark_noise_px * rng.normal();
    }
  }

  if (options.with_depth) {
    const auto& topo = model.topology();
    scene.depth.points.resize(3, options.depth_samples);
    for (int s = 0; s < options.depth_samples; ++s) {
      const auto t = static_cast<std::uint32_t>(rng.below(topo.size()));
      const double r1 = std::sqrt(rng.uniform());
      const double r2 = rng.uniform();
      const Eigen::Vector3d b(1.0 - r1, r1 * (1.0 - r2), r1 * r2);
      const auto& tri = topo[t];
      Eigen::Vector3d p = b[0] * scene.shape.vertex(tri[0]) + b[1] * scene.shape.vertex(tri[1]) +
                          b[2] * scene.shape.vertex(tri[2]);
      if (options.depth_noise_mm > 0.0) {
        for (int a = 0; a < 3; ++a) p[a] += options.depth_noise_mm * rng.normal();
      }
      scene.depth.points.col(s) = p;
      scene.depth_samples.push_back({t, b});
    }
  }
  return scene;
}

double evaluate_rmse(const Shape& predicted, const Shape& truth) {
  if (predicted.vertex_count() != truth.vertex_count() || truth.vertex_count() == 0) {
    fail(ErrorCode::kSizing, "shapes differ in vertex count");
  }
  return std::sqrt((predicted.positions - truth.positions).squaredNorm() /
                   static_cast<double>(truth.vertex_count()));
}

std::vector<ShapeSample> shape_training_samples(const SyntheticKit& kit, const SpectralBasis& basis,
                                               int count, double scan_noise_mm, Rng& rng) {
  if (basis.n_vertices() != kit.model.n_vertices()) {
    fail(ErrorCode::kSizing, "basis does not match the synthetic mesh");
  }
  std::vector<ShapeSample> samples;
  samples.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int s = 0; s < count; ++s) {
    const Coefficients c = sample_coefficients(kit.spec, rng);
    const Eigen::VectorXd e_tgt = sample_expression(kit.spec, rng);
    DisplacementField field = kit.nonlinear.transfer(c.identity, c.expression, e_tgt);
    if (field.vectors.size() == 0) field.vectors = Eigen::Matrix3Xd::Zero(3, kit.model.n_vertices());
    field.mesh_hash = basis.mesh_hash;
    if (scan_noise_mm > 0.0) {
      for (Index i = 0; i < field.vectors.size(); ++i) field.vectors.data()[i] += scan_noise_mm * rng.normal();
    }
    samples.push_back({shape_input(c.identity, c.expression, e_tgt), encode(basis, field).values});
  }
  return samples;
}

BenchmarkReport benchmark_shape_branch(const SyntheticKit& kit, const SpectralBasis& basis,
                                       const BenchmarkConfig& config) {
  if (config.n_train < 1 || config.n_test < 1 || config.seeds.empty()) {
    fail(ErrorCode::kInvalidArgument, "benchmark needs training and test samples and at least one seed");
  }
  if (basis.n_vertices() != kit.model.n_vertices()) {
    fail(ErrorCode::kSizing, "basis does not match the synthetic mesh");
  }
  const auto start = std::chrono::steady_clock::now();
  const BilinearModel& model = kit.model;
  BenchmarkReport report;
  for (std::uint64_t seed : config.seeds) {
    Rng rng(seed);
    auto noise = [&](auto& f) {
      if (config.scan_noise_mm <= 0.0) return;
      for (Index i = 0; i < f.size(); ++i) f.data()[i] += config.scan_noise_mm * rng.normal();
    };

    const std::vector<ShapeSample> train =
        shape_training_samples(kit, basis, config.n_train, config.scan_noise_mm, rng);
    ShapeTrainConfig train_config = config.train;
    train_config.seed = seed;
    const ShapeTrainResult trained = train_shape_branch(train, train_config);

    double sq_without = 0.0;
    double sq_with = 0.0;
    for (int s = 0; s < config.n_test; ++s) {
      const Coefficients c = sample_coefficients(kit.spec, rng);
      const Eigen::VectorXd e_tgt = sample_expression(kit.spec, rng);
      Shape truth = contract_bilinear(model, c.identity, e_tgt);
      Shape without = truth;
      if (!kit.nonlinear.empty()) {
        truth.matrix() += kit.nonlinear.evaluate(c.identity, e_tgt).vectors;
        // The source residual (refined minus linear) is carried over unchanged.
        without.matrix() += kit.nonlinear.evaluate(c.identity, c.expression).vectors;
      }
      noise(truth.positions);
      Shape with = without;
      with.matrix() += predict_deformation(trained.params, c.identity, c.expression, e_tgt, basis).vectors;
      const double rw = evaluate_rmse(without, truth);
      const double rp = evaluate_rmse(with, truth);
      sq_without += rw * rw;
      sq_with += rp * rp;
    }
    BenchmarkSeed row;
    row.seed = seed;
    row.rmse_without = std::sqrt(sq_without / config.n_test);
    row.rmse_with = std::sqrt(sq_with / config.n_test);
    row.final_train_loss = trained.epoch_loss.empty() ? trained.initial_loss : trained.epoch_loss.back();
    report.seeds.push_back(row);
  }
  int improved = 0;
  for (const auto& row : report.seeds) {
    report.mean_without += row.rmse_without;
    report.mean_with += row.rmse_with;
    if (row.rmse_with < row.rmse_without) ++improved;
  }
  const double count = static_cast<double>(report.seeds.size());
  report.mean_without /= count;
  report.mean_with /= count;
  report.improved_fraction = improved / count;
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

nlohmann::json to_json(const BenchmarkReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.seeds) {
    rows.push_back({{"seed", r.seed},
                    {"rmse_without_mm", r.rmse_without},
                    {"rmse_with_mm", r.rmse_with},
                    {"final_train_loss", r.final_train_loss}});
  }
  return {{"seeds", rows},
          {"mean_rmse_without_mm", report.mean_without},
          {"mean_rmse_with_mm", report.mean_with},
          {"improved_fraction", report.improved_fraction},
          {"seconds", report.seconds}};
}

BenchmarkReport benchmark_report_from_json(const nlohmann::json& j) {
  BenchmarkReport report;
  try {
    for (const auto& r : j.at("seeds")) {
      report.seeds.push_back({r.at("seed").get<std::uint64_t>(), r.at("rmse_without_mm").get<double>(),
                              r.at("rmse_with_mm").get<double>(), r.at("final_train_loss").get<double>()});
    }
    report.mean_without = j.at("mean_rmse_without_mm").get<double>();
    report.mean_with = j.at("mean_rmse_with_mm").get<double>();
    report.improved_fraction = j.at("improved_fraction").get<double>();
    report.seconds = j.at("seconds").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kMalformed, std::string("benchmark report: ") + e.what());
  }
  return report;
}

}  // namespace morphfit

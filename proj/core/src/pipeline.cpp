#include "morphfit/pipeline.hpp"

#include <chrono>
#include <set>

#include "morphfit/error.hpp"
#include "morphfit/image_io.hpp"
#include "morphfit/model_io.hpp"

namespace morphfit {
namespace {

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

Image mask_plane(const Mask& m) { return m.to_image(); }

Mask plane_mask(const Image& plane) {
  Mask m(plane.width(), plane.height());
  for (int y = 0; y < plane.height(); ++y) {
    for (int x = 0; x < plane.width(); ++x) m.at(x, y) = plane.at(x, y, 0) > 0.5 ? 1 : 0;
  }
  return m;
}

}  // namespace

PipelineConfig pipeline_config_from_json(const Json& j, const std::filesystem::path& base_dir,
                                         PipelineConfig c) {
  if (!j.is_object()) fail(ErrorCode::kMalformed, "pipeline config must be a JSON object");
  static const std::set<std::string> known = {
      "model", "fit", "resolution", "k", "shapenet_params", "blend", "out", "depth_refine",
      "landmark_refine", "position_scale", "seed", "include_semantic"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) fail(ErrorCode::kMalformed, "pipeline config: unknown key '" + key + "'");
  }
  try {
    if (j.contains("model")) c.model_path = resolve(j.at("model").get<std::string>(), base_dir);
    if (j.contains("fit")) c.fit = fit_config_from_json(j.at("fit"), c.fit);
    if (j.contains("resolution")) c.resolution = j.at("resolution").get<int>();
    if (j.contains("k")) c.k = j.at("k").get<Index>();
    if (j.contains("shapenet_params")) {
      c.shapenet_params = resolve(j.at("shapenet_params").get<std::string>(), base_dir);
    }
    if (j.contains("blend")) c.blend = blend_config_from_json(j.at("blend"), c.blend);
    if (j.contains("out")) c.out = resolve(j.at("out").get<std::string>(), base_dir);
    if (j.contains("depth_refine")) c.depth_refine = j.at("depth_refine").get<bool>();
    if (j.contains("landmark_refine")) c.landmark_refine = j.at("landmark_refine").get<bool>();
    if (j.contains("position_scale")) c.position_scale = j.at("position_scale").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("include_semantic")) c.include_semantic = j.at("include_semantic").get<bool>();
  } catch (const Json::exception& e) {
    fail(ErrorCode::kMalformed, std::string("pipeline config: ") + e.what());
  }
  if (c.resolution < 1) fail(ErrorCode::kInvalidArgument, "resolution must be >= 1");
  if (c.k < 1) fail(ErrorCode::kInvalidArgument, "k must be >= 1");
  if (!(c.position_scale > 0.0)) fail(ErrorCode::kInvalidArgument, "position_scale must be > 0");
  return c;
}

Json to_json(const PipelineConfig& c) {
  return {{"model", c.model_path.string()},
          {"fit", to_json(c.fit)},
          {"resolution", c.resolution},
          {"k", c.k},
          {"shapenet_params", c.shapenet_params.string()},
          {"blend", to_json(c.blend)},
          {"out", c.out.string()},
          {"depth_refine", c.depth_refine},
          {"landmark_refine", c.landmark_refine},
          {"position_scale", c.position_scale},
          {"seed", c.seed},
          {"include_semantic", c.include_semantic}};
}

Image to_rgb(const Image& image) {
  if (image.channels() == 3) return image;
  if (image.channels() < 1 || image.channels() > 4) {
    fail(ErrorCode::kMalformed, "images must have 1 to 4 channels");
  }
  Image out(image.width(), image.height(), 3);
  const bool gray = image.channels() <= 2;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = image.at(x, y, gray ? 0 : c);
    }
  }
  return out;
}

FitOutput run_fit(const BilinearModel& model, const Image& image, const Eigen::Matrix2Xd& landmarks,
                  const DepthFile* depth, const PipelineConfig& config) {
  if (landmarks.cols() != model.landmark_count()) {
    fail(ErrorCode::kSizing, "got " + std::to_string(landmarks.cols()) + " landmarks, model defines " +
                                 std::to_string(model.landmark_count()));
  }
  if (image.empty()) fail(ErrorCode::kInvalidArgument, "input image is empty");
  FitOutput out;
  out.image = to_rgb(image);
  out.fit = fit_image(model, landmarks, config.fit);
  out.linear = contract_bilinear(model, out.fit.coeffs);
  out.shape = out.linear;
  if (depth != nullptr && config.depth_refine && depth->points.cols() > 0) {
    DepthCloud cloud;
    cloud.points = depth->frame == "camera" ? to_model_frame(out.fit.pose, depth->points) : depth->points;
    out.shape = refine_with_depth(model, out.shape, cloud, config.fit).shape;
    out.depth_refined = true;
  }
  if (config.landmark_refine) {
    out.shape = refine_with_landmarks(model, out.shape, out.fit.pose, landmarks, config.fit);
    out.landmark_refined = true;
  }
  out.refined_landmark_rmse = landmark_rmse(model, out.shape, out.fit.pose, landmarks);
  out.texture = extract_texture(out.image, out.shape, out.fit.pose, model, config.resolution);
  return out;
}

Json fit_summary_json(const FitOutput& out, const PipelineConfig& config) {
  Json j;
  j["format"] = "morphfit-fit";
  j["version"] = 1;
  j["model"] = config.model_path.string();
  j["image_size"] = {out.image.width(), out.image.height()};
  j["pose"] = pose_to_json(out.fit.pose);
  j["identity"] = vector_to_json(out.fit.coeffs.identity);
  j["expression"] = vector_to_json(out.fit.coeffs.expression);
  j["landmark_rmse"] = out.fit.landmark_rmse;
  j["refined_landmark_rmse"] = out.refined_landmark_rmse;
  j["iterations"] = out.fit.iterations;
  j["converged"] = out.fit.converged;
  j["objective_history"] = out.fit.objective_history;
  j["depth_refined"] = out.depth_refined;
  j["landmark_refined"] = out.landmark_refined;
  j["resolution"] = config.resolution;
  return j;
}

void write_fit_outputs(const std::filesystem::path& dir, const FitOutput& out,
                       const BilinearModel& model, const PipelineConfig& config) {
  std::filesystem::create_directories(dir);
  Json j = fit_summary_json(out, config);
  j["shape"] = vector_to_json(out.shape.positions);
  j["files"] = {{"image", "input.pfm"},
                {"texture", "texture.pfm"},
                {"texture_valid", "texture_valid.pfm"}};
  write_pfm(dir / "input.pfm", out.image);
  write_pfm(dir / "texture.pfm", out.texture.image);
  write_pfm(dir / "texture_valid.pfm", mask_plane(out.texture.valid));
  write_png(dir / "texture.png", out.texture.image);
  const RenderResult diag =
      render(out.shape, out.texture, out.fit.pose, model, out.image.width(), out.image.height());
  write_png(dir / "render.png", diag.image);
  write_json_file(dir / "fit.json", j);
}

FitOutput load_fit_outputs(const std::filesystem::path& fit_json, const BilinearModel& model,
                           std::filesystem::path* model_path) {
  const Json j = read_json_file(fit_json);
  const auto dir = fit_json.parent_path();
  FitOutput out;
  try {
    if (j.value("format", "") != "morphfit-fit") fail(ErrorCode::kMalformed, "not a fit file");
    if (model_path != nullptr) *model_path = j.at("model").get<std::string>();
    out.fit.pose = pose_from_json(j.at("pose"));
    out.fit.coeffs.identity = vector_from_json(j.at("identity"));
    out.fit.coeffs.expression = vector_from_json(j.at("expression"));
    out.fit.landmark_rmse = j.at("landmark_rmse").get<double>();
    out.fit.iterations = j.at("iterations").get<int>();
    out.fit.converged = j.at("converged").get<bool>();
    out.fit.objective_history = j.at("objective_history").get<std::vector<double>>();
    out.depth_refined = j.at("depth_refined").get<bool>();
    out.landmark_refined = j.at("landmark_refined").get<bool>();
    out.refined_landmark_rmse = j.at("refined_landmark_rmse").get<double>();
    out.shape = Shape(vector_from_json(j.at("shape")));
    const auto& files = j.at("files");
    out.image = read_pfm(dir / files.at("image").get<std::string>());
    out.texture.image = read_pfm(dir / files.at("texture").get<std::string>());
    out.texture.valid = plane_mask(read_pfm(dir / files.at("texture_valid").get<std::string>()));
  } catch (const Json::exception& e) {
    fail(ErrorCode::kMalformed, fit_json.string() + ": " + e.what());
  }
  if (out.fit.coeffs.identity.size() != model.n_identity() ||
      out.fit.coeffs.expression.size() != model.n_expression() ||
      out.shape.vertex_count() != model.n_vertices()) {
    fail(ErrorCode::kSizing, fit_json.string() + " does not match the model dimensions");
  }
  out.linear = contract_bilinear(model, out.fit.coeffs);
  return out;
}

ShapeBranch load_shape_branch(const std::filesystem::path& params_dir, const BilinearModel& model) {
  ShapeBranch branch;
  branch.params = load_mlp(params_dir);
  if (branch.params.input_dim() != model.n_identity() + 2 * model.n_expression()) {
    fail(ErrorCode::kSizing, "shape branch input does not match N_a + 2 N_e");
  }
  if (branch.params.output_dim() % 3 != 0) fail(ErrorCode::kSizing, "shape branch output must be 3k");
  const Index k = branch.params.output_dim() / 3;
  const auto basis_dir = params_dir / "basis";
  if (std::filesystem::exists(basis_dir / "manifest.json")) {
    branch.basis = load_basis(basis_dir);
    if (branch.basis.k() > k) branch.basis = truncate(branch.basis, k);
  } else {
    branch.basis = mesh_eigenbasis(model, k);
  }
  if (branch.basis.k() != k || branch.basis.n_vertices() != model.n_vertices()) {
    fail(ErrorCode::kSizing, "stored basis does not match the shape branch");
  }
  return branch;
}

void check_expression(const BilinearModel& model, const Eigen::VectorXd& e, const Bounds& bounds) {
  if (e.size() != model.n_expression()) {
    fail(ErrorCode::kSizing, "expression has " + std::to_string(e.size()) + " entries, model uses " +
                                 std::to_string(model.n_expression()));
  }
  for (Index j = 0; j < e.size(); ++j) {
    if (!(e[j] >= bounds.lower && e[j] <= bounds.upper)) {
      fail(ErrorCode::kInvalidArgument, "expression coefficient " + std::to_string(j) + " = " +
                                            std::to_string(e[j]) + " lies outside [" +
                                            std::to_string(bounds.lower) + ", " +
                                            std::to_string(bounds.upper) + "]");
    }
  }
}

TransferOutput run_transfer(const BilinearModel& model, const FitOutput& fit,
                            const Eigen::VectorXd& e_tgt, const ShapeBranch* branch,
                            const PipelineConfig& config) {
  check_expression(model, e_tgt, config.fit.expression_bounds);
  const auto start = std::chrono::steady_clock::now();
  TransferOutput out;
  const Eigen::VectorXd& a = fit.fit.coeffs.identity;
  out.e_src = fit.fit.coeffs.expression;
  out.e_tgt = e_tgt;

  const Eigen::MatrixXd basis = expression_basis(model, a);
  out.target = fit.shape;
  out.target.positions += basis * (e_tgt - out.e_src);
  if (branch != nullptr) {
    out.target.matrix() += predict_deformation(branch->params, a, out.e_src, e_tgt, branch->basis).vectors;
  }

  const Shape neutral = contract_bilinear(model, a, model.neutral_expression());
  ConditioningConfig cc;
  cc.resolution = fit.texture.resolution();
  cc.seed = config.seed;
  cc.include_semantic = config.include_semantic;
  cc.position_scale = config.position_scale;
  out.stack = conditioning_stack(model, neutral, fit.shape, out.target, fit.texture, out.e_src, e_tgt, cc);

  const Eigen::VectorXd displacement =
      (out.target.matrix() - fit.shape.matrix()).colwise().norm().transpose();
  out.max_displacement = displacement.size() > 0 ? displacement.maxCoeff() : 0.0;
  const Eigen::MatrixXd per_vertex = displacement;
  out.render = render(out.target, fit.texture, fit.fit.pose, model, fit.image.width(),
                      fit.image.height(), &per_vertex);
  out.distance = out.render.attributes;
  out.margin = margin(out.render.coverage, config.blend.kernel);
  out.blended = blend(out.render.image, fit.image, out.render.coverage, out.distance, config.blend);
  out.render_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

void write_transfer_outputs(const std::filesystem::path& dir, const TransferOutput& out,
                            const BilinearModel& model) {
  std::filesystem::create_directories(dir);
  write_png(dir / "output.png", out.blended);
  write_pfm(dir / "output.pfm", out.blended);
  write_png(dir / "render.png", out.render.image);
  write_pfm(dir / "coverage.pfm", mask_plane(out.render.coverage));
  write_pfm(dir / "distance.pfm", out.distance);
  write_pfm(dir / "margin.pfm", mask_plane(out.margin));
  write_obj(dir / "target.obj", model, out.target);
  save_conditioning(dir / "conditioning", out.stack);
  write_json_file(dir / "transfer.json",
                  {{"format", "morphfit-transfer"},
                   {"version", 1},
                   {"e_src", vector_to_json(out.e_src)},
                   {"e_tgt", vector_to_json(out.e_tgt)},
                   {"max_displacement_mm", out.max_displacement},
                   {"covered_pixels", out.render.coverage.count()}});
}

}  // namespace morphfit

#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "morphfit/compositor.hpp"
#include "morphfit/conditioning.hpp"
#include "morphfit/fitting.hpp"
#include "morphfit/json_io.hpp"
#include "morphfit/raster.hpp"
#include "morphfit/shapenet.hpp"
#include "morphfit/spectral.hpp"

namespace morphfit {

struct PipelineConfig {
  std::filesystem::path model_path;
  FitConfig fit;
  int resolution = 256;
  Index k = 100;
  /// Optional shape-branch parameter bundle; without it the deformation term is zero.
  std::filesystem::path shapenet_params;
  BlendConfig blend;
  std::filesystem::path out;
  bool depth_refine = true;
  bool landmark_refine = false;
  double position_scale = 10.0;
  std::uint64_t seed = 0;
  bool include_semantic = false;
};

/// Keys mirror the struct fields; "fit" and "blend" hold nested objects. Unknown keys are
/// rejected. Relative paths are resolved against `base_dir`.
PipelineConfig pipeline_config_from_json(const Json& j, const std::filesystem::path& base_dir,
                                         PipelineConfig base = {});
Json to_json(const PipelineConfig& config);

/// Gray, gray+alpha and RGBA inputs become RGB.
Image to_rgb(const Image& image);

struct FitOutput {
  FitResult fit;
  Shape linear;         // contract(a, e)
  Shape shape;          // after optional depth / landmark refinement
  Texture texture;
  Image image;          // RGB input
  bool depth_refined = false;
  bool landmark_refined = false;
  double refined_landmark_rmse = 0.0;
};

/// Fits the model to one image and extracts its texture. `depth` may be in the camera or
/// model frame. Throws kSizing when the landmark count differs from the model's.
FitOutput run_fit(const BilinearModel& model, const Image& image, const Eigen::Matrix2Xd& landmarks,
                  const DepthFile* depth, const PipelineConfig& config);

/// Writes fit.json, input.pfm, texture.pfm, texture_valid.pfm, texture.png and render.png.
void write_fit_outputs(const std::filesystem::path& dir, const FitOutput& out,
                       const BilinearModel& model, const PipelineConfig& config);
Json fit_summary_json(const FitOutput& out, const PipelineConfig& config);
/// Reads a directory written by write_fit_outputs, given its fit.json.
FitOutput load_fit_outputs(const std::filesystem::path& fit_json, const BilinearModel& model,
                           std::filesystem::path* model_path = nullptr);

/// Optional learned correction D(a, e_src, e_tgt).
struct ShapeBranch {
  MlpParams params;
  SpectralBasis basis;
};

/// Loads the MLP bundle and computes (or truncates) the matching basis.
ShapeBranch load_shape_branch(const std::filesystem::path& params_dir, const BilinearModel& model);

struct TransferOutput {
  Eigen::VectorXd e_src;
  Eigen::VectorXd e_tgt;
  Shape target;
  ConditioningStack stack;
  RenderResult render;
  Image distance;      // per-pixel vertex distance, mm
  Mask margin;
  Image blended;
  double max_displacement = 0.0;  // mm
  double render_ms = 0.0;
};

/// target = shape + contract(a, e_tgt) - contract(a, e_src) + D(a, e_src, e_tgt), rendered with
/// the extracted texture and blended into the input image. Throws kSizing on a wrong-length
/// expression and kInvalidArgument when it leaves the configured bounds.
TransferOutput run_transfer(const BilinearModel& model, const FitOutput& fit,
                            const Eigen::VectorXd& e_tgt, const ShapeBranch* branch,
                            const PipelineConfig& config);

/// Writes output.png/.pfm, render.png, coverage.pfm, distance.pfm, margin.pfm, target.obj,
/// the conditioning bundle and transfer.json.
void write_transfer_outputs(const std::filesystem::path& dir, const TransferOutput& out,
                            const BilinearModel& model);

void check_expression(const BilinearModel& model, const Eigen::VectorXd& e, const Bounds& bounds);

}  // namespace morphfit

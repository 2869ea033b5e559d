#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "morphfit/image.hpp"
#include "morphfit/model.hpp"
#include "morphfit/raster.hpp"

namespace morphfit {

/// UV-space label plane; -1 on uncovered pixels.
struct SemanticMap {
  int resolution = 0;
  std::vector<std::int16_t> labels;
  Mask coverage;

  int at(int x, int y) const { return labels[static_cast<std::size_t>(y) * resolution + x]; }
  /// Legend in label-id order.
  static std::array<std::string_view, kSemanticLabelCount> legend();
};

/// Each covered pixel takes the majority label of its triangle's corners (ties to the lowest id).
SemanticMap semantic_map(const BilinearModel& model, int resolution);

/// Label assigned to a whole triangle by the corner-majority rule.
int triangle_label(const BilinearModel& model, const Triangle& tri);

struct ConditioningConfig {
  int resolution = 256;
  std::uint64_t seed = 0;
  bool include_semantic = false;
  /// Position differences are stored divided by this (mm).
  double position_scale = 10.0;
};

/// Channel layout:
///   0-2 source texture, 3-5 target normals, 6 one-ring area ratio target/neutral,
///   7 target curvature, 8-10 normal difference, 11-13 position difference / scale,
///   14 uniform noise, 15 semantic label (optional).
struct ConditioningStack {
  static constexpr int kBaseChannels = 15;
  static constexpr int kTexture = 0;
  static constexpr int kNormal = 3;
  static constexpr int kAreaRatio = 6;
  static constexpr int kCurvature = 7;
  static constexpr int kNormalDiff = 8;
  static constexpr int kPositionDiff = 11;
  static constexpr int kNoise = 14;
  static constexpr int kSemantic = 15;

  Image planes;
  Mask coverage;
  std::uint64_t seed = 0;
  double position_scale = 10.0;
  Eigen::VectorXd e_src;
  Eigen::VectorXd e_tgt;

  int channels() const { return planes.channels(); }
  bool has_semantic() const { return planes.channels() > kBaseChannels; }
  /// Position difference channels rescaled back to millimeters.
  Image position_difference_mm() const;
  static std::vector<std::string> channel_names(bool include_semantic);
};

/// Noise channel: row-major uniform [0,1) draws from Rng(seed), a pure function of (seed, resolution).
Image noise_plane(std::uint64_t seed, int resolution);

/// Builds the stack in the model's UV layout. `shape_neutral` is the fitted identity under the
/// neutral expression and is the reference for the area ratio.
ConditioningStack conditioning_stack(const BilinearModel& model, const Shape& shape_neutral,
                                     const Shape& shape_src, const Shape& shape_tgt,
                                     const Texture& texture_src, const Eigen::VectorXd& e_src,
                                     const Eigen::VectorXd& e_tgt, const ConditioningConfig& config);

void save_conditioning(const std::filesystem::path& directory, const ConditioningStack& stack);
ConditioningStack load_conditioning(const std::filesystem::path& directory);

}  // namespace morphfit

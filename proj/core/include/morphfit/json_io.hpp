#pragma once

#include <filesystem>
#include <string>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "morphfit/compositor.hpp"
#include "morphfit/fitting.hpp"
#include "morphfit/ganmath.hpp"
#include "morphfit/shapenet.hpp"
#include "morphfit/synthkit.hpp"

namespace morphfit {

using Json = nlohmann::json;

/// Parses a JSON file: kMissingInput when absent, kMalformed on syntax errors.
Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& value);

/// {"landmarks": [[x, y], ...]} in pixels.
Json landmarks_to_json(const Eigen::Matrix2Xd& landmarks);
Eigen::Matrix2Xd landmarks_from_json(const Json& j);

/// {"frame": "model" | "camera", "points": [[x, y, z], ...]} in millimeters.
struct DepthFile {
  std::string frame = "model";
  Eigen::Matrix3Xd points;
};
Json depth_to_json(const DepthFile& depth);
DepthFile depth_from_json(const Json& j);

Json pose_to_json(const CameraPose& pose);
CameraPose pose_from_json(const Json& j);

Json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const Json& j);

/// Expression preset: {"format": "morphfit-expression", "version": 1, "name": ..., "expression": [...]}.
/// Reading accepts any object with an "expression" array.
Json expression_to_json(const Eigen::VectorXd& e, const std::string& name = "");
Eigen::VectorXd expression_from_json(const Json& j);

/// Each key holds a number or an array of numbers.
DiscriminatorOutputs discriminator_from_json(const Json& j);

/// Partial objects override defaults; unknown keys are rejected with kMalformed.
FitConfig fit_config_from_json(const Json& j, FitConfig base = {});
Json to_json(const FitConfig& config);
BlendConfig blend_config_from_json(const Json& j, BlendConfig base = {});
Json to_json(const BlendConfig& config);
ShapeTrainConfig train_config_from_json(const Json& j, ShapeTrainConfig base = {});
Json to_json(const ShapeTrainConfig& config);
SyntheticSpec synthetic_spec_from_json(const Json& j, SyntheticSpec base = {});
Json to_json(const SyntheticSpec& spec);
/// "train" holds a nested train config.
BenchmarkConfig benchmark_config_from_json(const Json& j, BenchmarkConfig base = {});
Json to_json(const BenchmarkConfig& config);

}  // namespace morphfit

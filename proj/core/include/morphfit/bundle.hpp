#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "morphfit/image.hpp"

namespace morphfit {

/// Directory container of single-channel PFM planes plus manifest.json.
///
/// manifest.json:
///   { "format": "morphfit-bundle", "version": 1, "kind": <string>,
///     "planes": [ { "name", "width", "height", "precision": "f32" | "f32x2", "files": [...] } ],
///     "meta": { ...caller data... } }
///
/// "f32x2" planes store a double as hi = float(x) and lo = float(x - hi) in two files, which
/// keeps about 48 bits of mantissa through the float-only PFM format.
struct BundlePlane {
  std::string name;
  Image values;  // single channel
  bool high_precision = false;
};

struct Bundle {
  std::string kind;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<BundlePlane> planes;

  const BundlePlane& plane(const std::string& name) const;
};

void write_bundle(const std::filesystem::path& directory, const Bundle& bundle);
Bundle read_bundle(const std::filesystem::path& directory);

/// Matrix <-> single channel plane (rows = image height).
Image matrix_plane(const Eigen::MatrixXd& m);
Eigen::MatrixXd plane_matrix(const Image& plane);

}  // namespace morphfit

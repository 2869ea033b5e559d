#include "morphfit/bundle.hpp"

#include <fstream>

#include "morphfit/error.hpp"
#include "morphfit/image_io.hpp"

namespace morphfit {

const BundlePlane& Bundle::plane(const std::string& name) const {
  for (const auto& p : planes) {
    if (p.name == name) return p;
  }
  fail(ErrorCode::kMalformed, "bundle has no plane named '" + name + "'");
}

void write_bundle(const std::filesystem::path& directory, const Bundle& bundle) {
  std::filesystem::create_directories(directory);
  nlohmann::json manifest;
  manifest["format"] = "morphfit-bundle";
  manifest["version"] = 1;
  manifest["kind"] = bundle.kind;
  manifest["meta"] = bundle.meta;
  manifest["planes"] = nlohmann::json::array();
  for (std::size_t i = 0; i < bundle.planes.size(); ++i) {
    const auto& plane = bundle.planes[i];
    if (plane.values.channels() != 1) {
      fail(ErrorCode::kInvalidArgument, "bundle planes must be single channel");
    }
    const std::string stem = std::to_string(i) + "_" + plane.name;
    nlohmann::json entry{{"name", plane.name},
                         {"width", plane.values.width()},
                         {"height", plane.values.height()}};
    if (plane.high_precision) {
      Image hi(plane.values.width(), plane.values.height(), 1);
      Image lo(plane.values.width(), plane.values.height(), 1);
      for (std::size_t p = 0; p < hi.data().size(); ++p) {
        const double x = plane.values.data()[p];
        const float h = static_cast<float>(x);
        hi.data()[p] = h;
        lo.data()[p] = static_cast<float>(x - static_cast<double>(h));
      }
      write_pfm(directory / (stem + ".hi.pfm"), hi);
      write_pfm(directory / (stem + ".lo.pfm"), lo);
      entry["precision"] = "f32x2";
      entry["files"] = {stem + ".hi.pfm", stem + ".lo.pfm"};
    } else {
      write_pfm(directory / (stem + ".pfm"), plane.values);
      entry["precision"] = "f32";
      entry["files"] = {stem + ".pfm"};
    }
    manifest["planes"].push_back(entry);
  }
  std::ofstream out(directory / "manifest.json");
  if (!out) fail(ErrorCode::kIo, "cannot write manifest in " + directory.string());
  out << manifest.dump(2) << '\n';
}

Bundle read_bundle(const std::filesystem::path& directory) {
  const auto manifest_path = directory / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) fail(ErrorCode::kMissingInput, manifest_path.string());
  std::ifstream in(manifest_path);
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kMalformed, manifest_path.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != "morphfit-bundle") {
    fail(ErrorCode::kMalformed, manifest_path.string() + " is not a morphfit bundle manifest");
  }
  if (manifest.value("version", 0) != 1) {
    fail(ErrorCode::kVersionMismatch, "unsupported bundle version");
  }
  Bundle bundle;
  try {
    bundle.kind = manifest.at("kind").get<std::string>();
    bundle.meta = manifest.at("meta");
    for (const auto& entry : manifest.at("planes")) {
      BundlePlane plane;
      plane.name = entry.at("name").get<std::string>();
      const auto files = entry.at("files").get<std::vector<std::string>>();
      const auto precision = entry.at("precision").get<std::string>();
      if (precision == "f32x2") {
        if (files.size() != 2) fail(ErrorCode::kMalformed, "f32x2 plane needs two files");
        const Image hi = read_pfm(directory / files[0]);
        const Image lo = read_pfm(directory / files[1]);
        if (!hi.same_size(lo)) fail(ErrorCode::kMalformed, "f32x2 halves differ in size");
        plane.values = Image(hi.width(), hi.height(), 1);
        for (std::size_t p = 0; p < hi.data().size(); ++p) {
          plane.values.data()[p] = hi.data()[p] + lo.data()[p];
        }
        plane.high_precision = true;
      } else if (precision == "f32") {
        if (files.size() != 1) fail(ErrorCode::kMalformed, "f32 plane needs one file");
        plane.values = read_pfm(directory / files[0]);
      } else {
        fail(ErrorCode::kMalformed, "unknown plane precision '" + precision + "'");
      }
      if (plane.values.width() != entry.at("width").get<int>() ||
          plane.values.height() != entry.at("height").get<int>()) {
        fail(ErrorCode::kMalformed, "plane '" + plane.name + "' size disagrees with manifest");
      }
      bundle.planes.push_back(std::move(plane));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kMalformed, manifest_path.string() + ": " + e.what());
  }
  return bundle;
}

Image matrix_plane(const Eigen::MatrixXd& m) {
  Image out(static_cast<int>(m.cols()), static_cast<int>(m.rows()), 1);
  for (int r = 0; r < out.height(); ++r) {
    for (int c = 0; c < out.width(); ++c) out.at(c, r, 0) = m(r, c);
  }
  return out;
}

Eigen::MatrixXd plane_matrix(const Image& plane) {
  Eigen::MatrixXd m(plane.height(), plane.width());
  for (int r = 0; r < plane.height(); ++r) {
    for (int c = 0; c < plane.width(); ++c) m(r, c) = plane.at(c, r, 0);
  }
  return m;
}

}  // namespace morphfit

#include "morphfit/conditioning.hpp"

#include <string>

#include "morphfit/bundle.hpp"
#include "morphfit/error.hpp"
#include "morphfit/mesh.hpp"
#include "morphfit/rng.hpp"

namespace morphfit {

std::array<std::string_view, kSemanticLabelCount> SemanticMap::legend() {
  std::array<std::string_view, kSemanticLabelCount> names{};
  for (int i = 0; i < kSemanticLabelCount; ++i) names[i] = label_name(static_cast<SemanticLabel>(i));
  return names;
}

int triangle_label(const BilinearModel& model, const Triangle& tri) {
  std::array<int, kSemanticLabelCount> votes{};
  for (auto v : tri) {
    const int label = model.semantic()[v];
    if (label >= 0 && label < kSemanticLabelCount) ++votes[label];
  }
  int best = static_cast<int>(SemanticLabel::kOther);
  int best_votes = 0;
  for (int l = 0; l < kSemanticLabelCount; ++l) {
    if (votes[l] > best_votes) {
      best = l;
      best_votes = votes[l];
    }
  }
  return best;
}

SemanticMap semantic_map(const BilinearModel& model, int resolution) {
  const UvLayout layout = uv_layout(model, resolution);
  std::vector<std::int16_t> per_triangle(model.topology().size());
  for (std::size_t t = 0; t < per_triangle.size(); ++t) {
    per_triangle[t] = static_cast<std::int16_t>(triangle_label(model, model.topology()[t]));
  }
  SemanticMap map;
  map.resolution = resolution;
  map.coverage = layout.coverage;
  map.labels.assign(layout.triangle.size(), -1);
  for (std::size_t p = 0; p < layout.triangle.size(); ++p) {
    if (layout.triangle[p] >= 0) map.labels[p] = per_triangle[static_cast<std::size_t>(layout.triangle[p])];
  }
  return map;
}

Image ConditioningStack::position_difference_mm() const {
  Image out(planes.width(), planes.height(), 3);
  for (int y = 0; y < planes.height(); ++y) {
    for (int x = 0; x < planes.width(); ++x) {
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = planes.at(x, y, kPositionDiff + c) * position_scale;
    }
  }
  return out;
}

std::vector<std::string> ConditioningStack::channel_names(bool include_semantic) {
  std::vector<std::string> names = {
      "texture_r",     "texture_g",     "texture_b",      "normal_x",       "normal_y",
      "normal_z",      "area_ratio",    "curvature",      "normal_diff_x",  "normal_diff_y",
      "normal_diff_z", "position_diff_x", "position_diff_y", "position_diff_z", "noise"};
  if (include_semantic) names.emplace_back("semantic");
  return names;
}

Image noise_plane(std::uint64_t seed, int resolution) {
  Image out(resolution, resolution, 1);
  Rng rng(seed);
  for (auto& v : out.data()) v = rng.uniform();
  return out;
}

ConditioningStack conditioning_stack(const BilinearModel& model, const Shape& shape_neutral,
                                     const Shape& shape_src, const Shape& shape_tgt,
                                     const Texture& texture_src, const Eigen::VectorXd& e_src,
                                     const Eigen::VectorXd& e_tgt, const ConditioningConfig& config) {
  const Index n = model.n_vertices();
  for (const Shape* s : {&shape_neutral, &shape_src, &shape_tgt}) {
    if (s->vertex_count() != n) fail(ErrorCode::kSizing, "shape does not match the model topology");
  }
  if (e_src.size() != model.n_expression() || e_tgt.size() != model.n_expression()) {
    fail(ErrorCode::kSizing, "expression vectors must have length N_e");
  }
  if (!(config.position_scale > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "position_scale must be positive");
  }
  const int res = config.resolution;
  if (texture_src.image.width() != res || texture_src.image.height() != res ||
      texture_src.image.channels() != 3) {
    fail(ErrorCode::kSizing, "source texture must be a 3-channel " + std::to_string(res) + "^2 map");
  }

  const VertexAttributes neutral = vertex_attributes(model, shape_neutral);
  const VertexAttributes src = vertex_attributes(model, shape_src);
  const VertexAttributes tgt = vertex_attributes(model, shape_tgt);
  for (Index v = 0; v < n; ++v) {
    if (!(neutral.one_ring_area[v] > 0.0)) {
      fail(ErrorCode::kDegenerate, "neutral one-ring area of vertex " + std::to_string(v) + " is zero");
    }
  }

  // Per-vertex attributes in channel order, excluding texture, noise and semantic.
  Eigen::MatrixXd attrs(n, 11);
  attrs.leftCols<3>() = tgt.normals.transpose();
  attrs.col(3) = tgt.one_ring_area.cwiseQuotient(neutral.one_ring_area);
  attrs.col(4) = tgt.curvature;
  attrs.middleCols<3>(5) = (tgt.normals - src.normals).transpose();
  attrs.middleCols<3>(8) =
      ((shape_tgt.matrix() - shape_src.matrix()) / config.position_scale).transpose();

  const UvLayout layout = uv_layout(model, res);
  const Image geometry = interpolate_layout(layout, model.topology(), attrs);

  ConditioningStack stack;
  stack.seed = config.seed;
  stack.position_scale = config.position_scale;
  stack.e_src = e_src;
  stack.e_tgt = e_tgt;
  stack.coverage = layout.coverage;
  stack.planes = Image(res, res, ConditioningStack::kBaseChannels + (config.include_semantic ? 1 : 0));
  stack.planes.set_channels(ConditioningStack::kTexture, texture_src.image);
  stack.planes.set_channels(ConditioningStack::kNormal, geometry);
  stack.planes.set_channels(ConditioningStack::kNoise, noise_plane(config.seed, res));
  if (config.include_semantic) {
    const SemanticMap sem = semantic_map(model, res);
    Image plane(res, res, 1);
    for (int y = 0; y < res; ++y) {
      for (int x = 0; x < res; ++x) plane.at(x, y, 0) = sem.at(x, y) < 0 ? -1.0 : sem.at(x, y);
    }
    stack.planes.set_channels(ConditioningStack::kSemantic, plane);
  }
  return stack;
}

void save_conditioning(const std::filesystem::path& directory, const ConditioningStack& stack) {
  Bundle bundle;
  bundle.kind = "conditioning-stack";
  const auto names = ConditioningStack::channel_names(stack.has_semantic());
  bundle.meta = {{"channels", names},
                 {"seed", stack.seed},
                 {"position_scale", stack.position_scale},
                 {"resolution", stack.planes.width()},
                 {"e_src", std::vector<double>(stack.e_src.data(), stack.e_src.data() + stack.e_src.size())},
                 {"e_tgt", std::vector<double>(stack.e_tgt.data(), stack.e_tgt.data() + stack.e_tgt.size())}};
  for (int c = 0; c < stack.channels(); ++c) {
    bundle.planes.push_back({names[static_cast<std::size_t>(c)], stack.planes.channel(c), false});
  }
  bundle.planes.push_back({"coverage", stack.coverage.to_image(), false});
  write_bundle(directory, bundle);
}

ConditioningStack load_conditioning(const std::filesystem::path& directory) {
  const Bundle bundle = read_bundle(directory);
  if (bundle.kind != "conditioning-stack") {
    fail(ErrorCode::kMalformed, directory.string() + " is not a conditioning stack bundle");
  }
  ConditioningStack stack;
  try {
    const auto names = bundle.meta.at("channels").get<std::vector<std::string>>();
    stack.seed = bundle.meta.at("seed").get<std::uint64_t>();
    stack.position_scale = bundle.meta.at("position_scale").get<double>();
    const auto e_src = bundle.meta.at("e_src").get<std::vector<double>>();
    const auto e_tgt = bundle.meta.at("e_tgt").get<std::vector<double>>();
    stack.e_src = Eigen::Map<const Eigen::VectorXd>(e_src.data(), static_cast<Index>(e_src.size()));
    stack.e_tgt = Eigen::Map<const Eigen::VectorXd>(e_tgt.data(), static_cast<Index>(e_tgt.size()));
    if (names.size() < ConditioningStack::kBaseChannels) {
      fail(ErrorCode::kMalformed, "conditioning stack lists too few channels");
    }
    const Image& first = bundle.plane(names.front()).values;
    stack.planes = Image(first.width(), first.height(), static_cast<int>(names.size()));
    for (std::size_t c = 0; c < names.size(); ++c) {
      const Image& plane = bundle.plane(names[c]).values;
      if (!plane.same_size(first)) fail(ErrorCode::kMalformed, "channel sizes differ");
      stack.planes.set_channels(static_cast<int>(c), plane);
    }
    const Image& cov = bundle.plane("coverage").values;
    stack.coverage = Mask(cov.width(), cov.height());
    for (int y = 0; y < cov.height(); ++y) {
      for (int x = 0; x < cov.width(); ++x) stack.coverage.at(x, y) = cov.at(x, y, 0) > 0.5 ? 1 : 0;
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kMalformed, std::string("conditioning manifest: ") + e.what());
  }
  return stack;
}

}  // namespace morphfit

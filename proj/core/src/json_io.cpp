#include "morphfit/json_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <type_traits>

#include "morphfit/error.hpp"

namespace morphfit {
namespace {

template <class Fn>
auto guarded(const char* what, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Json::exception& e) {
    fail(ErrorCode::kMalformed, std::string(what) + ": " + e.what());
  }
}

void reject_unknown(const Json& j, const std::set<std::string>& known, const char* what) {
  if (!j.is_object()) fail(ErrorCode::kMalformed, std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) {
      fail(ErrorCode::kMalformed, std::string(what) + ": unknown key '" + key + "'");
    }
  }
}

double finite_number(const Json& v, const char* what) {
  if (!v.is_number()) fail(ErrorCode::kMalformed, std::string(what) + " must be numeric");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(ErrorCode::kMalformed, std::string(what) + " must be finite");
  return x;
}

template <int Rows>
Eigen::Matrix<double, Rows, Eigen::Dynamic> point_list(const Json& arr, const char* what) {
  if (!arr.is_array()) fail(ErrorCode::kMalformed, std::string(what) + " must be an array");
  Eigen::Matrix<double, Rows, Eigen::Dynamic> m(Rows, static_cast<Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& p = arr[i];
    if (!p.is_array() || p.size() != Rows) {
      fail(ErrorCode::kMalformed, std::string(what) + " entry " + std::to_string(i) + " must have " +
                                      std::to_string(Rows) + " coordinates");
    }
    for (int r = 0; r < Rows; ++r) m(r, static_cast<Index>(i)) = finite_number(p[static_cast<std::size_t>(r)], what);
  }
  return m;
}

template <int Rows>
Json point_array(const Eigen::Matrix<double, Rows, Eigen::Dynamic>& m) {
  Json arr = Json::array();
  for (Index c = 0; c < m.cols(); ++c) {
    Json p = Json::array();
    for (int r = 0; r < Rows; ++r) p.push_back(m(r, c));
    arr.push_back(p);
  }
  return arr;
}

}  // namespace

Json read_json_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::kMissingInput, path.string() + " does not exist");
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingInput, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    fail(ErrorCode::kMalformed, path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& value) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << value.dump(2) << '\n';
}

Json landmarks_to_json(const Eigen::Matrix2Xd& landmarks) {
  return {{"landmarks", point_array<2>(landmarks)}};
}

Eigen::Matrix2Xd landmarks_from_json(const Json& j) {
  return guarded("landmarks", [&] {
    const Json& arr = j.is_array() ? j : j.at("landmarks");
    return Eigen::Matrix2Xd(point_list<2>(arr, "landmarks"));
  });
}

Json depth_to_json(const DepthFile& depth) {
  return {{"frame", depth.frame}, {"points", point_array<3>(depth.points)}};
}

DepthFile depth_from_json(const Json& j) {
  return guarded("depth", [&] {
    DepthFile d;
    d.frame = j.value("frame", std::string("model"));
    if (d.frame != "model" && d.frame != "camera") {
      fail(ErrorCode::kMalformed, "depth frame must be 'model' or 'camera'");
    }
    d.points = point_list<3>(j.at("points"), "depth points");
    return d;
  });
}

Json pose_to_json(const CameraPose& pose) {
  Json rot = Json::array();
  for (int r = 0; r < 3; ++r) rot.push_back({pose.rotation(r, 0), pose.rotation(r, 1), pose.rotation(r, 2)});
  return {{"rotation", rot},
          {"scale", pose.scale},
          {"translation", {pose.translation.x(), pose.translation.y()}}};
}

CameraPose pose_from_json(const Json& j) {
  return guarded("pose", [&] {
    CameraPose pose;
    const auto& rot = j.at("rotation");
    if (!rot.is_array() || rot.size() != 3) fail(ErrorCode::kMalformed, "pose rotation must be 3x3");
    for (std::size_t r = 0; r < 3; ++r) {
      if (!rot[r].is_array() || rot[r].size() != 3) fail(ErrorCode::kMalformed, "pose rotation must be 3x3");
      for (std::size_t c = 0; c < 3; ++c) {
        pose.rotation(static_cast<Index>(r), static_cast<Index>(c)) = finite_number(rot[r][c], "rotation");
      }
    }
    pose.scale = finite_number(j.at("scale"), "scale");
    const auto& t = j.at("translation");
    if (!t.is_array() || t.size() != 2) fail(ErrorCode::kMalformed, "pose translation must have 2 entries");
    pose.translation = {finite_number(t[0], "translation"), finite_number(t[1], "translation")};
    if (!is_valid_pose(pose, 1e-6)) fail(ErrorCode::kMalformed, "pose rotation is not orthonormal");
    return pose;
  });
}

Json vector_to_json(const Eigen::VectorXd& v) {
  return Json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const Json& j) {
  if (!j.is_array()) fail(ErrorCode::kMalformed, "expected a numeric array");
  Eigen::VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Index>(i)] = finite_number(j[i], "array entry");
  return v;
}

Json expression_to_json(const Eigen::VectorXd& e, const std::string& name) {
  Json j{{"format", "morphfit-expression"}, {"version", 1}, {"expression", vector_to_json(e)}};
  if (!name.empty()) j["name"] = name;
  return j;
}

Eigen::VectorXd expression_from_json(const Json& j) {
  return guarded("expression", [&] {
    if (!j.is_object()) fail(ErrorCode::kMalformed, "expression file must be a JSON object");
    if (j.contains("format") && j.at("format") != "morphfit-expression") {
      fail(ErrorCode::kMalformed, "unexpected expression file format");
    }
    return vector_from_json(j.at("expression"));
  });
}

DiscriminatorOutputs discriminator_from_json(const Json& j) {
  return guarded("discriminator outputs", [&] {
    auto field = [&](const char* key) -> Eigen::ArrayXd {
      const Json& v = j.at(key);
      if (v.is_number()) return Eigen::ArrayXd::Constant(1, finite_number(v, key));
      return vector_from_json(v).array();
    };
    reject_unknown(j,
                   {"real_on_real", "real_on_fake", "pair_matched_real", "pair_matched_fake",
                    "pair_mismatched_real", "iden_real_real", "iden_real_fake", "iden_real_other"},
                   "discriminator outputs");
    DiscriminatorOutputs out;
    out.real_on_real = field("real_on_real");
    out.real_on_fake = field("real_on_fake");
    out.pair_matched_real = field("pair_matched_real");
    out.pair_matched_fake = field("pair_matched_fake");
    out.pair_mismatched_real = field("pair_mismatched_real");
    out.iden_real_real = field("iden_real_real");
    out.iden_real_fake = field("iden_real_fake");
    out.iden_real_other = field("iden_real_other");
    validate(out);
    return out;
  });
}

FitConfig fit_config_from_json(const Json& j, FitConfig c) {
  return guarded("fit config", [&] {
    reject_unknown(j,
                   {"max_outer_iterations", "convergence_tol", "identity_ridge", "expression_ridge",
                    "expression_bounds", "depth_iterations", "depth_regularization",
                    "max_correspondence_distance", "displacement_anchor"},
                   "fit config");
    if (j.contains("max_outer_iterations")) c.max_outer_iterations = j.at("max_outer_iterations").get<int>();
    if (j.contains("convergence_tol")) c.convergence_tol = j.at("convergence_tol").get<double>();
    if (j.contains("identity_ridge")) c.identity_ridge = j.at("identity_ridge").get<double>();
    if (j.contains("expression_ridge")) c.expression_ridge = j.at("expression_ridge").get<double>();
    if (j.contains("expression_bounds")) {
      const auto b = j.at("expression_bounds").get<std::vector<double>>();
      if (b.size() != 2) fail(ErrorCode::kMalformed, "expression_bounds must be [lower, upper]");
      c.expression_bounds = {b[0], b[1]};
    }
    if (j.contains("depth_iterations")) c.depth_iterations = j.at("depth_iterations").get<int>();
    if (j.contains("depth_regularization")) c.depth_regularization = j.at("depth_regularization").get<double>();
    if (j.contains("max_correspondence_distance")) {
      const auto& v = j.at("max_correspondence_distance");
      c.max_correspondence_distance =
          v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>();
    }
    if (j.contains("displacement_anchor")) c.displacement_anchor = j.at("displacement_anchor").get<double>();
    validate(c);
    return c;
  });
}

Json to_json(const FitConfig& c) {
  Json j{{"max_outer_iterations", c.max_outer_iterations},
         {"convergence_tol", c.convergence_tol},
         {"identity_ridge", c.identity_ridge},
         {"expression_ridge", c.expression_ridge},
         {"expression_bounds", {c.expression_bounds.lower, c.expression_bounds.upper}},
         {"depth_iterations", c.depth_iterations},
         {"depth_regularization", c.depth_regularization},
         {"displacement_anchor", c.displacement_anchor}};
  j["max_correspondence_distance"] =
      std::isfinite(c.max_correspondence_distance) ? Json(c.max_correspondence_distance) : Json(nullptr);
  return j;
}

BlendConfig blend_config_from_json(const Json& j, BlendConfig c) {
  return guarded("blend config", [&] {
    reject_unknown(j, {"kernel", "sigma2", "alpha_weights_input"}, "blend config");
    if (j.contains("kernel")) c.kernel = j.at("kernel").get<int>();
    if (j.contains("sigma2")) c.sigma2 = j.at("sigma2").get<double>();
    if (j.contains("alpha_weights_input")) c.alpha_weights_input = j.at("alpha_weights_input").get<bool>();
    validate(c);
    return c;
  });
}

Json to_json(const BlendConfig& c) {
  return {{"kernel", c.kernel}, {"sigma2", c.sigma2}, {"alpha_weights_input", c.alpha_weights_input}};
}

ShapeTrainConfig train_config_from_json(const Json& j, ShapeTrainConfig c) {
  return guarded("train config", [&] {
    reject_unknown(j,
                   {"hidden", "learning_rate", "beta1", "beta2", "epsilon", "batch_size", "epochs",
                    "seed", "weight_decay", "standardize_inputs"},
                   "train config");
    if (j.contains("hidden")) c.hidden = j.at("hidden").get<std::vector<int>>();
    if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("beta1")) c.beta1 = j.at("beta1").get<double>();
    if (j.contains("beta2")) c.beta2 = j.at("beta2").get<double>();
    if (j.contains("epsilon")) c.epsilon = j.at("epsilon").get<double>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("weight_decay")) c.weight_decay = j.at("weight_decay").get<double>();
    if (j.contains("standardize_inputs")) c.standardize_inputs = j.at("standardize_inputs").get<bool>();
    validate(c);
    return c;
  });
}

Json to_json(const ShapeTrainConfig& c) {
  return {{"hidden", c.hidden},         {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},           {"beta2", c.beta2},
          {"epsilon", c.epsilon},       {"batch_size", c.batch_size},
          {"epochs", c.epochs},         {"seed", c.seed},
          {"weight_decay", c.weight_decay}, {"standardize_inputs", c.standardize_inputs}};
}


SyntheticSpec synthetic_spec_from_json(const Json& j, SyntheticSpec c) {
  return guarded("synthetic spec", [&] {
    reject_unknown(j,
                   {"seed", "n_vertices", "n_identity", "n_expression", "semi_axes", "mode_band",
                    "mode_knee", "identity_amplitude", "expression_amplitude", "coupling_amplitude",
                    "coupling_rank", "nonlinear_amplitude", "nonlinear_terms", "nonlinear_band",
                    "nonlinear_gain", "landmark_count", "identity_sigma", "expression_max"},
                   "synthetic spec");
    auto read = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    read("seed", c.seed);
    read("n_vertices", c.n_vertices);
    read("n_identity", c.n_identity);
    read("n_expression", c.n_expression);
    if (j.contains("semi_axes")) {
      const auto axes = j.at("semi_axes").get<std::vector<double>>();
      if (axes.size() != 3) fail(ErrorCode::kMalformed, "semi_axes needs 3 values");
      c.semi_axes = Eigen::Vector3d(axes[0], axes[1], axes[2]);
    }
    read("mode_band", c.mode_band);
    read("mode_knee", c.mode_knee);
    read("identity_amplitude", c.identity_amplitude);
    read("expression_amplitude", c.expression_amplitude);
    read("coupling_amplitude", c.coupling_amplitude);
    read("coupling_rank", c.coupling_rank);
    read("nonlinear_amplitude", c.nonlinear_amplitude);
    read("nonlinear_terms", c.nonlinear_terms);
    read("nonlinear_band", c.nonlinear_band);
    read("nonlinear_gain", c.nonlinear_gain);
    read("landmark_count", c.landmark_count);
    read("identity_sigma", c.identity_sigma);
    read("expression_max", c.expression_max);
    validate(c);
    return c;
  });
}

Json to_json(const SyntheticSpec& c) {
  return {{"seed", c.seed},
          {"n_vertices", c.n_vertices},
          {"n_identity", c.n_identity},
          {"n_expression", c.n_expression},
          {"semi_axes", {c.semi_axes.x(), c.semi_axes.y(), c.semi_axes.z()}},
          {"mode_band", c.mode_band},
          {"mode_knee", c.mode_knee},
          {"identity_amplitude", c.identity_amplitude},
          {"expression_amplitude", c.expression_amplitude},
          {"coupling_amplitude", c.coupling_amplitude},
          {"coupling_rank", c.coupling_rank},
          {"nonlinear_amplitude", c.nonlinear_amplitude},
          {"nonlinear_terms", c.nonlinear_terms},
          {"nonlinear_band", c.nonlinear_band},
          {"nonlinear_gain", c.nonlinear_gain},
          {"landmark_count", c.landmark_count},
          {"identity_sigma", c.identity_sigma},
          {"expression_max", c.expression_max}};
}

BenchmarkConfig benchmark_config_from_json(const Json& j, BenchmarkConfig c) {
  return guarded("benchmark config", [&] {
    reject_unknown(j, {"n_train", "n_test", "seeds", "k", "scan_noise_mm", "train"}, "benchmark config");
    if (j.contains("n_train")) c.n_train = j.at("n_train").get<int>();
    if (j.contains("n_test")) c.n_test = j.at("n_test").get<int>();
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("k")) c.k = j.at("k").get<Index>();
    if (j.contains("scan_noise_mm")) c.scan_noise_mm = j.at("scan_noise_mm").get<double>();
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"), c.train);
    if (c.n_train < 1 || c.n_test < 1 || c.k < 1 || c.seeds.empty() || !(c.scan_noise_mm >= 0.0)) {
      fail(ErrorCode::kInvalidArgument, "benchmark config needs n_train, n_test, k >= 1, seeds and noise >= 0");
    }
    return c;
  });
}

Json to_json(const BenchmarkConfig& c) {
  return {{"n_train", c.n_train}, {"n_test", c.n_test},           {"seeds", c.seeds},
          {"k", c.k},             {"scan_noise_mm", c.scan_noise_mm}, {"train", to_json(c.train)}};
}

}  // namespace morphfit

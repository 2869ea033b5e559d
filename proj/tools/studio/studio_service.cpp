#include "studio_service.hpp"

#include <array>
#include <chrono>
#include <cstdio>
#include <vector>

#include <boost/beast/core/detail/base64.hpp>
#include <httplib.h>

#include "morphfit/error.hpp"
#include "morphfit/image_io.hpp"
#include "morphfit/json_io.hpp"
#include "morphfit/model_io.hpp"
#include "morphfit/synthkit.hpp"

namespace morphfit::studio {

namespace b64 = boost::beast::detail::base64;

std::string base64_encode(const std::string& bytes) {
  std::string out(b64::encoded_size(bytes.size()), '\0');
  out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
  return out;
}

std::optional<std::string> base64_decode(const std::string& text) {
  std::size_t len = text.size();
  std::size_t padding = 0;
  while (len > 0 && text[len - 1] == '=' && padding < 2) {
    --len;
    ++padding;
  }
  std::string out(b64::decoded_size(text.size()), '\0');
  const auto [written, read] = b64::decode(out.data(), text.data(), len);
  if (read != len) return std::nullopt;
  out.resize(written);
  return out;
}

struct StudioService::Model {
  std::string id;
  BilinearModel model;
  std::optional<ShapeBranch> branch;
  Json meta;
};

struct StudioService::Session {
  std::string id;
  std::shared_ptr<const Model> model;
  FitOutput fit;
  PipelineConfig config;

  std::mutex mutex;
  std::condition_variable cv;
  bool busy = false;
  std::uint64_t waiting = 0;  // ticket of the queued request, 0 when none
  std::uint64_t next_ticket = 0;
  std::string last_key;
  Response last_response;
};

namespace {

Response json_response(int status, const Json& body) {
  Response r;
  r.status = status;
  r.body = body.dump();
  return r;
}

Response error_response(int status, const std::string& message) {
  return json_response(status, {{"error", message}});
}

int create_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound:
    case ErrorCode::kMissingInput: return 404;
    case ErrorCode::kDegenerate:
    case ErrorCode::kNumerical: return 422;
    case ErrorCode::kIo: return 500;
    default: return 400;
  }
}

// Dominant semantic region of each expression unit. A unit's mean per-vertex offset from the
// neutral slice in each labelled region is divided by that region's average over all units, so a
// unit is grouped where it moves unusually strongly rather than where every unit moves most.
Json expression_groups(const BilinearModel& model) {
  const Index ref_e = model.reference_expression();
  const Index ref_a = model.reference_identity();
  const Index ne = model.n_expression();
  std::array<double, kSemanticLabelCount> count{};
  for (auto label : model.semantic()) count[label] += 1.0;

  std::vector<std::array<double, kSemanticLabelCount>> mean(static_cast<std::size_t>(ne));
  std::array<double, kSemanticLabelCount> average{};
  for (Index j = 0; j < ne; ++j) {
    auto& m = mean[static_cast<std::size_t>(j)];
    m.fill(0.0);
    if (ref_e < 0 || j == ref_e) continue;
    const Eigen::VectorXd diff = model.slice(ref_a, j) - model.slice(ref_a, ref_e);
    for (Index v = 0; v < model.n_vertices(); ++v) {
      m[model.semantic()[static_cast<std::size_t>(v)]] += diff.segment<3>(3 * v).norm();
    }
    for (int l = 0; l < kSemanticLabelCount; ++l) {
      if (count[l] > 0.0) m[l] /= count[l];
      average[l] += m[l] / static_cast<double>(ne);
    }
  }

  Json groups = Json::array();
  for (Index j = 0; j < ne; ++j) {
    int best = static_cast<int>(SemanticLabel::kOther);
    double best_score = 0.0;
    if (ref_e >= 0 && j != ref_e) {
      for (int l = 0; l < kSemanticLabelCount; ++l) {
        if (!(average[l] > 0.0)) continue;
        const double score = mean[static_cast<std::size_t>(j)][l] / average[l];
        if (score > best_score) {
          best_score = score;
          best = l;
        }
      }
    }
    groups.push_back(std::string(label_name(static_cast<SemanticLabel>(best))));
  }
  return groups;
}

Json describe(const std::string& id, const BilinearModel& model, const Bounds& bounds, bool has_branch) {
  Json legend = Json::array();
  for (int l = 0; l < kSemanticLabelCount; ++l) {
    legend.push_back({{"id", l}, {"name", std::string(label_name(static_cast<SemanticLabel>(l)))}});
  }
  return {{"id", id},
          {"n_vertices", model.n_vertices()},
          {"n_identity", model.n_identity()},
          {"n_expression", model.n_expression()},
          {"bounds", {{"lower", bounds.lower}, {"upper", bounds.upper}}},
          {"semantic_legend", legend},
          {"landmark_count", model.landmark_count()},
          {"neutral_expression", vector_to_json(model.neutral_expression())},
          {"expression_groups", expression_groups(model)},
          {"shape_branch", has_branch}};
}

std::optional<Json> parse_object(const std::string& body) {
  Json j = Json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

}  // namespace

StudioService::StudioService(ServiceOptions options) : options_(std::move(options)) {}
StudioService::~StudioService() = default;

std::size_t StudioService::session_count() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

std::shared_ptr<const StudioService::Model> StudioService::model(const std::string& id) {
  std::lock_guard lock(mutex_);
  if (auto it = models_.find(id); it != models_.end()) return it->second;

  auto m = std::make_shared<Model>();
  m->id = id;
  if (auto it = options_.models.find(id); it != options_.models.end()) {
    m->model = load_model(it->second);
  } else if (id == "synthetic" && options_.builtin_synthetic) {
    m->model = make_synthetic_model(SyntheticSpec{});
  } else {
    fail(ErrorCode::kNotFound, "unknown model '" + id + "'");
  }
  if (auto it = options_.shape_branches.find(id); it != options_.shape_branches.end()) {
    m->branch = load_shape_branch(it->second, m->model);
  }
  m->meta = describe(id, m->model, options_.pipeline.fit.expression_bounds, m->branch.has_value());
  models_[id] = m;
  return m;
}

std::shared_ptr<StudioService::Session> StudioService::session(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

Response StudioService::model_meta(const std::string& model_id) {
  const std::string id = model_id.empty() ? "synthetic" : model_id;
  try {
    return json_response(200, model(id)->meta);
  } catch (const Error& e) {
    return error_response(create_status(e.code()), e.what());
  }
}

Response StudioService::list_models() {
  Json ids = Json::array();
  if (options_.builtin_synthetic) ids.push_back("synthetic");
  for (const auto& [id, path] : options_.models) {
    if (id != "synthetic" || !options_.builtin_synthetic) ids.push_back(id);
  }
  return json_response(200, {{"models", ids}});
}

Response StudioService::create_session(const std::string& body) {
  const auto request = parse_object(body);
  if (!request) return error_response(400, "request body must be a JSON object");
  if (!request->contains("landmarks")) return error_response(400, "missing \"landmarks\"");
  if (!request->contains("image") || !request->at("image").is_string()) {
    return error_response(400, "missing \"image\" (base64-encoded PNG)");
  }
  try {
    const std::string id = request->value("model", std::string("synthetic"));
    const auto m = model(id);

    PipelineConfig config = options_.pipeline;
    if (request->contains("fit")) config.fit = fit_config_from_json(request->at("fit"), config.fit);
    if (request->contains("blend")) config.blend = blend_config_from_json(request->at("blend"), config.blend);

    const auto png = base64_decode(request->at("image").get<std::string>());
    if (!png) return error_response(400, "\"image\" is not valid base64");
    const Image image = decode_png(*png);
    const Eigen::Matrix2Xd landmarks = landmarks_from_json(request->at("landmarks"));
    std::optional<DepthFile> depth;
    if (request->contains("depth")) depth = depth_from_json(request->at("depth"));

    auto s = std::make_shared<Session>();
    s->model = m;
    s->config = config;
    s->fit = run_fit(m->model, image, landmarks, depth ? &*depth : nullptr, config);
    {
      std::lock_guard lock(mutex_);
      s->id = "s" + std::to_string(next_session_++);
      sessions_[s->id] = s;
    }
    Json summary = fit_summary_json(s->fit, config);
    summary.erase("objective_history");
    summary["model"] = id;
    return json_response(201, {{"session", s->id}, {"fit", summary}});
  } catch (const Error& e) {
    return error_response(create_status(e.code()), e.what());
  }
}

Response StudioService::delete_session(const std::string& session_id) {
  std::lock_guard lock(mutex_);
  if (sessions_.erase(session_id) == 0) return error_response(404, "unknown session '" + session_id + "'");
  return json_response(200, {{"deleted", session_id}});
}

Response StudioService::render(const std::string& session_id, const std::string& body) {
  const auto s = session(session_id);
  if (!s) return error_response(404, "unknown session '" + session_id + "'");
  const auto request = parse_object(body);
  if (!request) return error_response(400, "request body must be a JSON object");
  if (!request->contains("expression")) return error_response(400, "missing \"expression\"");

  Eigen::VectorXd e;
  PipelineConfig config = s->config;
  try {
    e = vector_from_json(request->at("expression"));
    if (request->contains("blend")) config.blend = blend_config_from_json(request->at("blend"), config.blend);
    validate(config.blend);
  } catch (const Error& err) {
    return error_response(400, err.what());
  }
  try {
    check_expression(s->model->model, e, config.fit.expression_bounds);
  } catch (const Error& err) {
    return error_response(422, err.what());
  }
  const std::string key = Json{{"e", vector_to_json(e)}, {"blend", to_json(config.blend)}}.dump();

  {
    std::unique_lock lock(s->mutex);
    const std::uint64_t ticket = ++s->next_ticket;
    if (s->busy || s->waiting != 0) {
      s->waiting = ticket;
      s->cv.notify_all();
      s->cv.wait(lock, [&] { return s->waiting != ticket || !s->busy; });
      if (s->waiting != ticket) return error_response(409, "superseded by a newer render request");
      s->waiting = 0;
    }
    s->busy = true;
    if (key == s->last_key) {
      s->busy = false;
      s->cv.notify_all();
      Response cached = s->last_response;
      cached.headers["X-Render-Ms"] = "0";
      return cached;
    }
  }

  Response response;
  try {
    const auto start = std::chrono::steady_clock::now();
    const ShapeBranch* branch = s->model->branch ? &*s->model->branch : nullptr;
    const TransferOutput out = run_transfer(s->model->model, s->fit, e, branch, config);
    response.content_type = "image/png";
    response.body = encode_png(out.blended);
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.3f", ms);
    response.headers["X-Render-Ms"] = buffer;
    std::snprintf(buffer, sizeof buffer, "%.6f", out.max_displacement);
    response.headers["X-Max-Displacement"] = buffer;
  } catch (const Error& err) {
    response = error_response(err.code() == ErrorCode::kInvalidArgument ? 422 : 500, err.what());
  }

  std::lock_guard lock(s->mutex);
  if (response.status == 200) {
    s->last_key = key;
    s->last_response = response;
  }
  s->busy = false;
  s->cv.notify_all();
  return response;
}

namespace {

void send(httplib::Response& res, const Response& r) {
  res.status = r.status;
  for (const auto& [name, value] : r.headers) res.set_header(name, value);
  res.set_content(r.body, r.content_type);
}

}  // namespace

void StudioService::mount(httplib::Server& server) {
  server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"status":"ok"})", "application/json");
  });
  server.Get("/models", [this](const httplib::Request&, httplib::Response& res) { send(res, list_models()); });
  server.Get("/model/meta", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, model_meta(req.get_param_value("id")));
  });
  server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, create_session(req.body));
  });
  server.Post(R"(/sessions/([^/]+)/render)", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, render(req.matches[1], req.body));
  });
  server.Delete(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, delete_session(req.matches[1]));
  });
}

}  // namespace morphfit::studio

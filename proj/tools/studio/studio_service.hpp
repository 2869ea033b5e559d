#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "morphfit/model.hpp"
#include "morphfit/pipeline.hpp"

namespace httplib {
class Server;
}

namespace morphfit::studio {

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::map<std::string, std::string> headers;
};

struct ServiceOptions {
  /// Model id -> model file. Loaded on first use.
  std::map<std::string, std::filesystem::path> models;
  /// Serve the default synthetic model under the id "synthetic".
  bool builtin_synthetic = true;
  /// Model id -> shape-branch parameter directory.
  std::map<std::string, std::filesystem::path> shape_branches;
  /// Base pipeline settings for every session; requests may override "fit" and "blend".
  PipelineConfig pipeline = [] {
    PipelineConfig c;
    c.fit.max_outer_iterations = 200;
    return c;
  }();
};

/// Expression Studio backend. Sessions hold an immutable fit snapshot; renders are pure functions
/// of (session, request body). Each session renders one request at a time and keeps at most one
/// request waiting: a newer request supersedes the waiting one, which is answered with 409.
class StudioService {
 public:
  explicit StudioService(ServiceOptions options = {});
  ~StudioService();

  /// POST /sessions. Body: {"model", "landmarks", "image" (base64 PNG), optional "depth", "fit"}.
  Response create_session(const std::string& body);
  /// POST /sessions/{id}/render. Body: {"expression": [...], optional "blend"}.
  Response render(const std::string& session_id, const std::string& body);
  /// DELETE /sessions/{id}.
  Response delete_session(const std::string& session_id);
  /// GET /model/meta?id=...
  Response model_meta(const std::string& model_id);
  /// GET /models
  Response list_models();

  /// Registers every endpoint on an httplib server.
  void mount(httplib::Server& server);

  std::size_t session_count() const;

 private:
  struct Model;
  struct Session;

  std::shared_ptr<const Model> model(const std::string& id);
  std::shared_ptr<Session> session(const std::string& id) const;

  ServiceOptions options_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const Model>> models_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_session_ = 1;
};

/// Standard base64 without line breaks; decoding rejects characters outside the alphabet.
std::string base64_encode(const std::string& bytes);
std::optional<std::string> base64_decode(const std::string& text);

}  // namespace morphfit::studio

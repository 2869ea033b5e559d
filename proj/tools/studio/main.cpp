#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

// Eigen must be parsed before httplib: <resolv.h> defines a `_res` macro that breaks it.
#include "studio_service.hpp"

#include <CLI11.hpp>
#include <httplib.h>

namespace {

// "id=path" pairs from repeated flags.
bool split_pairs(const std::vector<std::string>& items, std::map<std::string, std::filesystem::path>& out) {
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
      std::cerr << "morphfit-studio: expected id=path, got '" << item << "'\n";
      return false;
    }
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"morphfit-studio: HTTP service behind the Expression Studio"};
  int port = 8080;
  if (const char* env = std::getenv("MORPHFIT_PORT")) {
    try {
      port = std::stoi(env);
    } catch (const std::exception&) {
      std::cerr << "morphfit-studio: MORPHFIT_PORT is not a number\n";
      return 2;
    }
  }
  std::string host = "127.0.0.1";
  std::vector<std::string> models, branches;
  bool no_synthetic = false;
  app.add_option("--port", port, "Listen port (default: $MORPHFIT_PORT or 8080)");
  app.add_option("--host", host, "Listen address");
  app.add_option("--model", models, "Serve a model file as id=path (repeatable)");
  app.add_option("--shapenet", branches, "Shape-branch parameters for a model as id=dir (repeatable)");
  app.add_flag("--no-synthetic", no_synthetic, "Do not serve the built-in synthetic model");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  morphfit::studio::ServiceOptions options;
  options.builtin_synthetic = !no_synthetic;
  if (!split_pairs(models, options.models) || !split_pairs(branches, options.shape_branches)) return 2;

  morphfit::studio::StudioService service(options);
  httplib::Server server;
  service.mount(server);
  if (!server.bind_to_port(host, port)) {
    std::cerr << "morphfit-studio: cannot listen on " << host << ":" << port << "\n";
    return 3;
  }
  std::cout << "morphfit-studio listening on http://" << host << ":" << port << std::endl;
  server.listen_after_bind();
  return 0;
}

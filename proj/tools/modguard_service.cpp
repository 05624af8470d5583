// HTTP review service over a modguard store.
#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>

#include "modguard/error.hpp"
#include "modguard/service.hpp"

namespace fs = std::filesystem;
using namespace modguard;

namespace {
ReviewService* g_service = nullptr;
void on_signal(int) {
  if (g_service != nullptr) g_service->stop();
}
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"modguard-service: review queue, verdicts, lexicons and metrics over HTTP"};
  std::string config_path;
  std::string data_dir;
  std::string host;
  int port = -1;
  std::string static_dir;
  app.add_option("--config", config_path, "Pipeline config (JSON); its \"service\" block sets defaults")->required();
  app.add_option("--data-dir", data_dir, "Store root")->required();
  app.add_option("--host", host, "Listen address (overrides config)");
  app.add_option("--port", port, "Listen port, 0 for any free port (overrides config)");
  app.add_option("--static-dir", static_dir, "Serve static files from this directory at /");
  CLI11_PARSE(app, argc, argv);

  try {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot read config file " + config_path);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("config file " + config_path + " is not valid JSON: " + e.what());
    }
    ServiceConfig cfg = service_config_from_json(doc, fs::absolute(config_path).parent_path());
    cfg.data_dir = data_dir;
    if (!host.empty()) cfg.host = host;
    if (port >= 0) cfg.port = port;
    if (!static_dir.empty()) cfg.static_dir = static_dir;

    ReviewService service(cfg);
    const int bound = service.bind();
    g_service = &service;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cout << "listening on " << cfg.host << ':' << bound << std::endl;
    service.serve();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

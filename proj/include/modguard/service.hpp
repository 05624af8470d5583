#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include "modguard/pipeline.hpp"
#include "modguard/store.hpp"

namespace httplib {
class Server;
}

namespace modguard {

struct ServiceConfig {
  std::filesystem::path data_dir;
  PipelineConfig pipeline;  // filter, embedder and week length for views
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::string> token;  // required in X-Modguard-Token when set
  std::optional<std::filesystem::path> static_dir;
};

// Reads the optional "service" block of a pipeline config document:
// {host, port, token_env, static_dir}.
ServiceConfig service_config_from_json(const json& j, const std::filesystem::path& base_dir);

struct ApiResponse {
  int status = 200;
  json body;
};

// {code, message, details}
json error_body(std::string_view code, std::string_view message, json details = json::object());

using QueryParams = std::map<std::string, std::string>;

class ReviewService {
 public:
  explicit ReviewService(ServiceConfig cfg);
  ~ReviewService();
  ReviewService(const ReviewService&) = delete;
  ReviewService& operator=(const ReviewService&) = delete;

  // Endpoint logic, independent of the transport.
  ApiResponse review_queue(const QueryParams& params) const;
  ApiResponse submit_verdict(const std::string& flag_id, std::string_view body);
  ApiResponse lexicons(const QueryParams& params) const;
  ApiResponse weekly_metrics() const;
  ApiResponse moderate(std::string_view body) const;

  // Binds to cfg.host; port 0 picks a free one. Returns the bound port.
  int bind();
  // Blocks serving requests until stop().
  void serve();
  void stop();

 private:
  const EpochData& epoch_data(std::int64_t epoch) const;
  void install_routes();

  ServiceConfig cfg_;
  std::unique_ptr<Store> store_;
  std::unique_ptr<Embedder> embedder_;
  // Verdict writes take it exclusively, every read shares it.
  mutable std::shared_mutex state_mutex_;
  mutable std::mutex cache_mutex_;
  mutable std::map<std::int64_t, std::shared_ptr<const EpochData>> cache_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace modguard

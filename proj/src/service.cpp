#include "modguard/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>

#include "modguard/error.hpp"
#include "modguard/feedback.hpp"
#include "modguard/filter.hpp"

namespace modguard {

namespace fs = std::filesystem;

ServiceConfig service_config_from_json(const json& j, const fs::path& base_dir) {
  ServiceConfig cfg;
  cfg.pipeline = config_from_json(j, base_dir);
  const auto it = j.find("service");
  if (it == j.end()) return cfg;
  try {
    const json& s = *it;
    cfg.host = s.value("host", cfg.host);
    cfg.port = s.value("port", cfg.port);
    if (s.contains("token_env")) {
      const auto name = s.at("token_env").get<std::string>();
      const char* value = std::getenv(name.c_str());
      if (value == nullptr || *value == '\0') throw ConfigError("service token variable " + name + " is not set");
      cfg.token = value;
    }
    if (s.contains("static_dir")) {
      fs::path p = s.at("static_dir").get<std::string>();
      cfg.static_dir = p.is_absolute() ? p : base_dir / p;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid service block: ") + e.what());
  }
  if (cfg.port < 0 || cfg.port > 65535) throw ConfigError("service.port out of range");
  return cfg;
}

json error_body(std::string_view code, std::string_view message, json details) {
  return json{{"code", code}, {"message", message}, {"details", std::move(details)}};
}

namespace {

ApiResponse fail(int status, std::string_view code, std::string_view message, json details = json::object()) {
  return ApiResponse{status, error_body(code, message, std::move(details))};
}

constexpr std::size_t kDefaultLimit = 50;
constexpr std::size_t kMaxLimit = 500;

// Position of a flag in queue order: newest epoch first, then reverse file order.
struct QueueKey {
  std::int64_t epoch;
  std::size_t seq;
  bool operator<(const QueueKey& o) const { return epoch != o.epoch ? epoch > o.epoch : seq > o.seq; }
};

std::string encode_cursor(const QueueKey& k) { return "e" + std::to_string(k.epoch) + "s" + std::to_string(k.seq); }

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

std::optional<QueueKey> decode_cursor(std::string_view c) {
  if (c.size() < 4 || c.front() != 'e') return std::nullopt;
  const auto s = c.find('s');
  if (s == std::string_view::npos) return std::nullopt;
  QueueKey k{};
  if (!parse_number(c.substr(1, s - 1), k.epoch) || k.epoch < 0) return std::nullopt;
  if (!parse_number(c.substr(s + 1), k.seq)) return std::nullopt;
  return k;
}

std::string now_rfc3339() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ApiResponse from_exception(const std::exception& e) {
  if (dynamic_cast<const NotFoundError*>(&e) != nullptr) return fail(404, "not_found", e.what());
  if (dynamic_cast<const ConflictError*>(&e) != nullptr) return fail(409, "conflict", e.what());
  if (dynamic_cast<const ValidationError*>(&e) != nullptr) return fail(400, "bad_request", e.what());
  if (dynamic_cast<const IntegrityError*>(&e) != nullptr) return fail(500, "integrity", e.what());
  return fail(500, "internal", e.what());
}

}  // namespace

ReviewService::ReviewService(ServiceConfig cfg)
    : cfg_(std::move(cfg)),
      store_(std::make_unique<Store>(cfg_.data_dir)),
      embedder_(make_embedder(cfg_.pipeline.embedder)) {
  cfg_.pipeline.filter.validate();
}

ReviewService::~ReviewService() = default;

const EpochData& ReviewService::epoch_data(std::int64_t epoch) const {
  {
    std::lock_guard lock(cache_mutex_);
    if (auto it = cache_.find(epoch); it != cache_.end()) return *it->second;
  }
  // Sealed epochs never change, so a loaded copy stays valid.
  auto data = std::make_shared<const EpochData>(store_->load_epoch(epoch));
  std::lock_guard lock(cache_mutex_);
  return *cache_.emplace(epoch, std::move(data)).first->second;
}

ApiResponse ReviewService::review_queue(const QueryParams& params) const {
  std::shared_lock lock(state_mutex_);
  try {
    std::optional<FlagStatus> status;
    std::size_t limit = kDefaultLimit;
    std::optional<QueueKey> cursor;
    std::vector<std::int64_t> epochs = store_->epochs();
    json field_errors = json::object();

    if (auto it = params.find("status"); it != params.end() && !it->second.empty()) {
      try {
        status = parse_flag_status(it->second);
      } catch (const Error&) {
        field_errors["status"] = "unknown status '" + it->second + "'";
      }
    }
    if (auto it = params.find("limit"); it != params.end()) {
      if (!parse_number(it->second, limit) || limit == 0 || limit > kMaxLimit) {
        field_errors["limit"] = "limit must be an integer in [1, " + std::to_string(kMaxLimit) + "]";
      }
    }
    if (auto it = params.find("cursor"); it != params.end() && !it->second.empty()) {
      cursor = decode_cursor(it->second);
      if (!cursor) field_errors["cursor"] = "malformed cursor";
    }
    std::optional<std::int64_t> epoch;
    if (auto it = params.find("epoch"); it != params.end() && !it->second.empty()) {
      std::int64_t e = 0;
      if (!parse_number(it->second, e)) {
        field_errors["epoch"] = "epoch must be an integer";
      } else {
        epoch = e;
      }
    }
    if (!field_errors.empty()) return fail(400, "bad_request", "invalid query parameters", {{"fields", field_errors}});
    if (epoch) {
      if (!store_->has_epoch(*epoch)) return fail(404, "not_found", "unknown epoch " + std::to_string(*epoch));
      epochs = {*epoch};
    }

    const auto latest = latest_verdicts(store_->all_verdicts());
    json items = json::array();
    std::optional<QueueKey> last;
    bool more = false;
    std::sort(epochs.rbegin(), epochs.rend());
    for (auto e : epochs) {
      if (more) break;
      if (cursor && e > cursor->epoch) continue;
      const EpochData& data = epoch_data(e);
      std::unordered_map<std::string, const ValidationReport*> reports;
      for (const auto& r : data.reports) reports[r.flag_id] = &r;
      for (std::size_t i = data.flags.size(); i-- > 0;) {
        const QueueKey key{e, i};
        if (cursor && !(*cursor < key)) continue;
        const FlaggedInstance& f = data.flags[i];
        const FlagStatus effective = effective_status(f, latest);
        if (status && effective != *status) continue;
        if (items.size() == limit) {
          more = true;
          break;
        }
        json flag = f;
        flag["status"] = to_string(effective);
        const auto r = reports.find(f.flag_id);
        const auto v = latest.find(f.flag_id);
        items.push_back({{"flag", std::move(flag)},
                         {"report", r != reports.end() ? json(*r->second) : json(nullptr)},
                         {"verdict", v != latest.end() ? json(v->second) : json(nullptr)}});
        last = key;
      }
    }
    return ApiResponse{200, {{"items", std::move(items)},
                             {"next_cursor", more && last ? json(encode_cursor(*last)) : json(nullptr)}}};
  } catch (const std::exception& e) {
    return from_exception(e);
  }
}

ApiResponse ReviewService::submit_verdict(const std::string& flag_id, std::string_view body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception&) {
    return fail(400, "bad_request", "body is not valid JSON");
  }
  if (!doc.is_object()) return fail(400, "bad_request", "body must be a JSON object");

  json field_errors = json::object();
  FlagStatus verdict = FlagStatus::HumanFp;
  std::string reviewer;
  std::string timestamp = now_rfc3339();
  std::optional<std::string> supersedes;

  const auto verdict_it = doc.find("verdict");
  if (verdict_it == doc.end() || !verdict_it->is_string()) {
    field_errors["verdict"] = "required: HUMAN_TP or HUMAN_FP";
  } else {
    try {
      verdict = parse_flag_status(verdict_it->get<std::string>());
      if (!is_human(verdict)) field_errors["verdict"] = "must be HUMAN_TP or HUMAN_FP";
    } catch (const Error&) {
      field_errors["verdict"] = "must be HUMAN_TP or HUMAN_FP";
    }
  }
  const auto reviewer_it = doc.find("reviewer_id");
  if (reviewer_it == doc.end() || !reviewer_it->is_string() || reviewer_it->get<std::string>().empty()) {
    field_errors["reviewer_id"] = "required non-empty string";
  } else {
    reviewer = reviewer_it->get<std::string>();
  }
  if (auto it = doc.find("timestamp"); it != doc.end()) {
    if (!it->is_string() || !is_rfc3339(it->get<std::string>())) {
      field_errors["timestamp"] = "must be an RFC 3339 timestamp";
    } else {
      timestamp = it->get<std::string>();
    }
  }
  if (auto it = doc.find("supersedes"); it != doc.end() && !it->is_null()) {
    if (!it->is_string()) {
      field_errors["supersedes"] = "must be a verdict id";
    } else {
      supersedes = it->get<std::string>();
    }
  }
  if (!field_errors.empty()) return fail(400, "bad_request", "invalid verdict", {{"fields", field_errors}});

  std::unique_lock lock(state_mutex_);
  try {
    if (!store_->latest_epoch()) return fail(404, "not_found", "unknown flag '" + flag_id + "'");
    VerdictOutcome out = ingest_human_verdict(*store_, flag_id, verdict, reviewer, timestamp, supersedes);
    json flag = out.flag;
    return ApiResponse{200, {{"flag", std::move(flag)},
                             {"status", to_string(out.flag.status)},
                             {"verdict", out.record},
                             {"duplicate", out.duplicate}}};
  } catch (const std::exception& e) {
    return from_exception(e);
  }
}

ApiResponse ReviewService::lexicons(const QueryParams& params) const {
  std::shared_lock lock(state_mutex_);
  try {
    std::string sort = "score";
    if (auto it = params.find("sort"); it != params.end() && !it->second.empty()) sort = it->second;
    if (sort != "score" && sort != "id" && sort != "term") {
      return fail(400, "bad_request", "sort must be score, id or term", {{"fields", {{"sort", "unknown key"}}}});
    }
    const auto latest = store_->latest_epoch();
    if (!latest) return fail(503, "unavailable", "no snapshot has been committed yet");
    const json state = state_to_json(epoch_data(*latest).state);
    std::vector<json> entries = state.at("entries").get<std::vector<json>>();
    std::stable_sort(entries.begin(), entries.end(), [&](const json& a, const json& b) {
      if (sort == "score") {
        const double sa = a.at("score").get<double>();
        const double sb = b.at("score").get<double>();
        if (sa != sb) return sa > sb;
        return a.at("lexicon_id").get<std::string>() < b.at("lexicon_id").get<std::string>();
      }
      const char* key = sort == "id" ? "lexicon_id" : "term";
      return a.at(key).get<std::string>() < b.at(key).get<std::string>();
    });
    return ApiResponse{200, {{"epoch", *latest}, {"lexicons", entries}}};
  } catch (const std::exception& e) {
    return from_exception(e);
  }
}

ApiResponse ReviewService::weekly_metrics() const {
  std::shared_lock lock(state_mutex_);
  try {
    std::vector<FlaggedInstance> flags;
    const auto epochs = store_->epochs();
    for (auto e : epochs) {
      const auto& data = epoch_data(e);
      flags.insert(flags.end(), data.flags.begin(), data.flags.end());
    }
    const auto latest = latest_verdicts(store_->all_verdicts());
    const auto weeks =
        summarize_weeks(flags, cfg_.pipeline.epochs_per_week, latest, epochs.empty() ? -1 : epochs.back());
    return ApiResponse{200, to_json_report(weeks)};
  } catch (const std::exception& e) {
    return from_exception(e);
  }
}

ApiResponse ReviewService::moderate(std::string_view body) const {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception&) {
    return fail(400, "bad_request", "body is not valid JSON");
  }
  if (!doc.is_object()) return fail(400, "bad_request", "body must be a JSON object");

  QueryRecord q;
  json field_errors = json::object();
  if (auto it = doc.find("query"); it == doc.end() || !it->is_string()) {
    field_errors["query"] = "required string";
  } else {
    q.text = it->get<std::string>();
  }
  q.query_id = doc.value("query_id", std::string("dry-run"));
  q.timestamp = doc.value("timestamp", now_rfc3339());
  if (auto it = doc.find("results"); it == doc.end() || !it->is_array()) {
    field_errors["results"] = "required array";
  } else {
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& r = (*it)[i];
      try {
        ResultRecord rec;
        rec.result_id = r.at("result_id").get<std::string>();
        rec.title = r.at("title").get<std::string>();
        rec.rank = r.contains("rank") ? r.at("rank").get<int>() : static_cast<int>(i) + 1;
        if (r.contains("metadata")) rec.metadata = r.at("metadata").get<MetadataRecord>();
        q.results.push_back(std::move(rec));
      } catch (const std::exception& e) {
        field_errors["results[" + std::to_string(i) + "]"] = e.what();
      }
    }
  }
  if (field_errors.empty()) {
    for (const auto& v : validate_record(q)) field_errors[std::string(to_string(v.code))] = v.detail;
  }
  if (!field_errors.empty()) return fail(400, "bad_request", "invalid moderation request", {{"fields", field_errors}});

  std::shared_lock lock(state_mutex_);
  try {
    const auto latest = store_->latest_epoch();
    if (!latest) return fail(503, "unavailable", "no snapshot has been committed yet");
    truncate_top_k(q, cfg_.pipeline.filter.top_k);
    const auto flags = filter_query(q, epoch_data(*latest).state, *embedder_, cfg_.pipeline.filter, *latest);
    return ApiResponse{200, {{"epoch", *latest}, {"flags", flags}}};
  } catch (const std::exception& e) {
    return from_exception(e);
  }
}

void ReviewService::install_routes() {
  auto& srv = *server_;
  auto send = [](httplib::Response& res, const ApiResponse& api) {
    res.status = api.status;
    res.set_content(api.body.dump(), "application/json");
  };
  auto params_of = [](const httplib::Request& req) {
    QueryParams p;
    for (const auto& [k, v] : req.params) p[k] = v;
    return p;
  };

  srv.set_pre_routing_handler([this, send](const httplib::Request& req, httplib::Response& res) {
    if (!cfg_.token || req.path.rfind("/v1/", 0) != 0) return httplib::Server::HandlerResponse::Unhandled;
    if (req.get_header_value("X-Modguard-Token") == *cfg_.token) return httplib::Server::HandlerResponse::Unhandled;
    send(res, fail(401, "unauthorized", "missing or wrong X-Modguard-Token header"));
    return httplib::Server::HandlerResponse::Handled;
  });

  srv.Get("/v1/review/queue", [this, send, params_of](const httplib::Request& req, httplib::Response& res) {
    send(res, review_queue(params_of(req)));
  });
  srv.Post(R"(/v1/review/([^/]+)/verdict)", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, submit_verdict(req.matches[1].str(), req.body));
  });
  srv.Get("/v1/lexicons", [this, send, params_of](const httplib::Request& req, httplib::Response& res) {
    send(res, lexicons(params_of(req)));
  });
  srv.Get("/v1/metrics/weekly",
          [this, send](const httplib::Request&, httplib::Response& res) { send(res, weekly_metrics()); });
  srv.Post("/v1/moderate",
           [this, send](const httplib::Request& req, httplib::Response& res) { send(res, moderate(req.body)); });

  if (cfg_.static_dir) {
    if (!srv.set_mount_point("/", cfg_.static_dir->string())) {
      throw ConfigError("static_dir does not exist: " + cfg_.static_dir->string());
    }
  }
  srv.set_error_handler([send](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404) {
      send(res, fail(404, "not_found", "no route for " + req.method + " " + req.path));
    } else {
      send(res, fail(res.status, "error", httplib::status_message(res.status)));
    }
  });
  srv.set_exception_handler([send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      send(res, from_exception(e));
    } catch (...) {
      send(res, fail(500, "internal", "unknown error"));
    }
  });
}

int ReviewService::bind() {
  if (!server_) {
    server_ = std::make_unique<httplib::Server>();
    install_routes();
  }
  int port = cfg_.port;
  if (port == 0) {
    port = server_->bind_to_any_port(cfg_.host);
  } else if (!server_->bind_to_port(cfg_.host, port)) {
    port = -1;
  }
  if (port < 0) throw IoError("cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
  return port;
}

void ReviewService::serve() {
  if (!server_) throw Error("bind() must be called before serve()");
  server_->listen_after_bind();
}

void ReviewService::stop() {
  if (server_) server_->stop();
}

}  // namespace modguard

#include "modguard/validator.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>
#include <thread>
#include <unordered_map>

#include "modguard/error.hpp"
#include "modguard/hash.hpp"
#include "modguard/text.hpp"
#include "prompts_data.hpp"

namespace modguard {

namespace {

const std::set<std::string, std::less<>>& known_tasks() {
  static const std::set<std::string, std::less<>> names = {std::string(kQueryIrrelevancy),
                                                           std::string(kAgeEstimation),
                                                           std::string(kPolicyViolation), std::string(kCotJudgment)};
  return names;
}

std::string metadata_text(const MetadataRecord& m) {
  std::string out;
  auto add = [&](std::string_view label, const std::string& value) {
    if (!out.empty()) out.append("; ");
    out.append(label);
    out.append(": ");
    out.append(value);
  };
  if (m.age_rating) add("age rating", *m.age_rating);
  if (m.genre) {
    std::string joined;
    for (const auto& g : *m.genre) {
      if (!joined.empty()) joined.append(", ");
      joined.append(g);
    }
    add("genre", joined);
  }
  if (m.description) add("description", *m.description);
  return out.empty() ? "(none)" : out;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

}  // namespace

// --- configuration --------------------------------------------------------------

std::vector<ValidationTask> ValidatorConfig::default_tasks() {
  std::vector<ValidationTask> tasks;
  for (auto name : {kQueryIrrelevancy, kAgeEstimation, kPolicyViolation, kCotJudgment}) {
    tasks.push_back(ValidationTask{std::string(name), 0.25, builtin_prompt(name)});
  }
  return tasks;
}

void ValidatorConfig::validate() const {
  if (backend == ValidatorBackend::HttpLlm && (!endpoint || endpoint->empty() || !model_name || model_name->empty())) {
    throw ConfigError("HTTP_LLM validator requires endpoint and model_name");
  }
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
  if (tasks.empty()) throw ConfigError("validator needs at least one task");
  std::set<std::string> seen;
  double sum = 0.0;
  for (const auto& t : tasks) {
    if (known_tasks().count(t.name) == 0) throw ConfigError("unknown validation task '" + t.name + "'");
    if (!seen.insert(t.name).second) throw ConfigError("validation task '" + t.name + "' listed twice");
    if (!(t.weight >= 0.0 && t.weight <= 1.0)) throw ConfigError("weight of task '" + t.name + "' outside [0,1]");
    sum += t.weight;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("validation task weights must sum to 1");
}

void to_json(json& j, const ValidatorConfig& c) {
  json tasks = json::array();
  for (const auto& t : c.tasks) tasks.push_back({{"name", t.name}, {"weight", t.weight}});
  j = json{{"backend", c.backend == ValidatorBackend::Mock ? "MOCK" : "HTTP_LLM"},
           {"timeout_ms", c.timeout.count()},
           {"max_retries", c.max_retries},
           {"backoff_ms", c.backoff.count()},
           {"max_in_flight", c.max_in_flight},
           {"tasks", std::move(tasks)}};
  if (c.endpoint) j["endpoint"] = *c.endpoint;
  if (c.model_name) j["model_name"] = *c.model_name;
  if (c.api_key_env) j["api_key_env"] = *c.api_key_env;
}

void from_json(const json& j, ValidatorConfig& c) {
  c = ValidatorConfig{};
  const std::string backend = j.value("backend", std::string("MOCK"));
  if (backend == "MOCK") {
    c.backend = ValidatorBackend::Mock;
  } else if (backend == "HTTP_LLM") {
    c.backend = ValidatorBackend::HttpLlm;
  } else {
    throw ConfigError("unknown validator backend '" + backend + "' (expected MOCK | HTTP_LLM)");
  }
  if (j.contains("endpoint")) c.endpoint = j.at("endpoint").get<std::string>();
  if (j.contains("model_name")) c.model_name = j.at("model_name").get<std::string>();
  if (j.contains("api_key_env")) c.api_key_env = j.at("api_key_env").get<std::string>();
  c.timeout = std::chrono::milliseconds(j.value("timeout_ms", c.timeout.count()));
  c.max_retries = j.value("max_retries", c.max_retries);
  c.backoff = std::chrono::milliseconds(j.value("backoff_ms", c.backoff.count()));
  c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
  if (j.contains("tasks")) {
    c.tasks.clear();
    const auto& tasks = j.at("tasks");
    for (const auto& t : tasks) {
      ValidationTask task;
      task.name = t.at("name").get<std::string>();
      if (known_tasks().count(task.name) == 0) throw ConfigError("unknown validation task '" + task.name + "'");
      // Weights default to uniform over the configured tasks.
      task.weight = t.contains("weight") ? t.at("weight").get<double>() : 1.0 / static_cast<double>(tasks.size());
      task.prompt_template = t.contains("prompt_template") ? t.at("prompt_template").get<std::string>()
                                                           : builtin_prompt(task.name);
      c.tasks.push_back(std::move(task));
    }
  }
}

const std::string& builtin_prompt(std::string_view task_name) {
  static const std::unordered_map<std::string, std::string> prompts = {
      {std::string(kQueryIrrelevancy), std::string(prompts::kQueryIrrelevancy)},
      {std::string(kAgeEstimation), std::string(prompts::kAgeEstimation)},
      {std::string(kPolicyViolation), std::string(prompts::kPolicyViolation)},
      {std::string(kCotJudgment), std::string(prompts::kCotJudgment)},
  };
  auto it = prompts.find(std::string(task_name));
  if (it == prompts.end()) throw ConfigError("no built-in prompt for task '" + std::string(task_name) + "'");
  return it->second;
}

const std::string& system_prompt() {
  static const std::string prompt(prompts::kSystem);
  return prompt;
}

std::string render_prompt(const std::string& tmpl, const FlaggedInstance& flag, const QueryRecord& q,
                          const ResultRecord& r) {
  (void)flag;
  std::string out = tmpl;
  replace_all(out, "{{query}}", q.text);
  replace_all(out, "{{result}}", r.title);
  replace_all(out, "{{metadata}}", metadata_text(r.metadata));
  return out;
}

// --- mock oracle ------------------------------------------------------------------

TaskJudgment MockOracle::score(const ValidationTask& task, const FlaggedInstance& flag, const QueryRecord& q,
                               const ResultRecord& r) const {
  std::vector<std::string> tokens = text::tokenize(text::normalize(r.title));
  auto add_field = [&](const std::string& s) {
    for (auto& t : text::tokenize(text::normalize(s))) tokens.push_back(std::move(t));
  };
  if (r.metadata.description) add_field(*r.metadata.description);
  if (r.metadata.genre) {
    for (const auto& g : *r.metadata.genre) add_field(g);
  }
  if (r.metadata.age_rating) add_field(*r.metadata.age_rating);
  const bool violation = std::find(tokens.begin(), tokens.end(), kViolationMarker) != tokens.end();

  std::string key = q.query_id;
  key.push_back('\x1f');
  key.append(flag.result_id.empty() ? r.result_id : flag.result_id);
  key.push_back('\x1f');
  key.append(task.name);
  // Top 53 bits -> [0,1), then onto [-0.05, 0.05].
  const double unit = static_cast<double>(mix64(fnv1a64(key)) >> 11) * 0x1.0p-53;
  const double jitter = (unit * 2.0 - 1.0) * 0.05;
  const double base = violation ? 0.05 : 0.95;

  TaskJudgment j;
  j.score = std::clamp(base + jitter, 0.0, 1.0);
  j.rationale = violation ? "mock: violation marker present in result" : "mock: no violation marker in result";
  return j;
}

// --- HTTP LLM scorer --------------------------------------------------------------

HttpLlmScorer::HttpLlmScorer(ValidatorConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const std::string& url = *cfg_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("validator endpoint must be an absolute URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (cfg_.api_key_env) {
    if (const char* key = std::getenv(cfg_.api_key_env->c_str()); key != nullptr && *key != '\0') api_key_ = key;
  }
}

TaskJudgment parse_llm_reply(std::string_view body) {
  json reply;
  try {
    reply = json::parse(body);
  } catch (const std::exception& e) {
    throw BackendError(std::string("response is not JSON: ") + e.what());
  }
  std::string content;
  try {
    content = reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const std::exception&) {
    throw BackendError("response has no choices[0].message.content");
  }
  // Tolerate code fences or chatter around the object.
  const auto open = content.find('{');
  const auto close = content.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    throw BackendError("model reply contains no JSON object");
  }
  json verdict;
  try {
    verdict = json::parse(content.substr(open, close - open + 1));
  } catch (const std::exception& e) {
    throw BackendError(std::string("model reply is not valid JSON: ") + e.what());
  }
  if (!verdict.contains("score") || !verdict["score"].is_number()) {
    throw BackendError("model reply lacks a numeric score");
  }
  TaskJudgment j;
  j.score = verdict["score"].get<double>();
  if (!(j.score >= 0.0 && j.score <= 1.0)) throw BackendError("model score outside [0,1]");
  if (verdict.contains("rationale") && verdict["rationale"].is_string()) j.rationale = verdict["rationale"];
  return j;
}

TaskJudgment HttpLlmScorer::score(const ValidationTask& task, const FlaggedInstance& flag, const QueryRecord& q,
                                  const ResultRecord& r) const {
  const json request = {
      {"model", *cfg_.model_name},
      {"temperature", 0},
      {"messages",
       json::array({{{"role", "system"}, {"content", system_prompt()}},
                    {{"role", "user"}, {"content", render_prompt(task.prompt_template, flag, q, r)}}})}};
  const std::string body = request.dump();

  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(cfg_.timeout);
  client.set_read_timeout(cfg_.timeout);
  client.set_write_timeout(cfg_.timeout);
  httplib::Headers headers;
  if (api_key_) headers.emplace("Authorization", "Bearer " + *api_key_);

  std::string last_error;
  auto delay = cfg_.backoff;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500 || res->status == 429) {  // server trouble or rate limiting
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) throw BackendError("HTTP " + std::to_string(res->status) + " from validator endpoint");
    return parse_llm_reply(res->body);
  }
  throw BackendError("validator endpoint failed after " + std::to_string(cfg_.max_retries + 1) +
                     " attempts: " + last_error);
}

std::unique_ptr<TaskScorer> make_scorer(const ValidatorConfig& cfg) {
  cfg.validate();
  if (cfg.backend == ValidatorBackend::HttpLlm) return std::make_unique<HttpLlmScorer>(cfg);
  return std::make_unique<MockOracle>();
}

// --- aggregation ------------------------------------------------------------------

FlagStatus verdict_for(double aggregate_v) {
  return aggregate_v >= 0.5 ? FlagStatus::ValidatedFp : FlagStatus::ValidatedTp;
}

ValidationOutcome validate(const FlaggedInstance& flag, const QueryRecord& q, const ResultRecord& r,
                           const ValidatorConfig& cfg, const TaskScorer& scorer) {
  ValidationReport report;
  report.flag_id = flag.flag_id;
  report.source = scorer.source();
  std::string rationale;
  double v = 0.0;
  for (const auto& task : cfg.tasks) {
    TaskJudgment j;
    try {
      j = scorer.score(task, flag, q, r);
    } catch (const BackendError& e) {
      return ValidationOutcome{std::nullopt, ValidationFailure{flag.flag_id, task.name + ": " + e.what()}};
    }
    if (!(j.score >= 0.0 && j.score <= 1.0)) {
      return ValidationOutcome{std::nullopt, ValidationFailure{flag.flag_id, task.name + ": score outside [0,1]"}};
    }
    report.task_scores[task.name] = j.score;
    report.weights[task.name] = task.weight;
    v += task.weight * j.score;
    if (task.name == kCotJudgment) {
      rationale = j.rationale;
    } else if (rationale.empty()) {
      rationale = j.rationale;
    }
  }
  report.aggregate_v = std::clamp(v, 0.0, 1.0);
  if (!rationale.empty()) report.rationale = rationale;
  return ValidationOutcome{std::move(report), std::nullopt};
}

ValidationOutcome validate(const FlaggedInstance& flag, const QueryRecord& q, const ResultRecord& r,
                           const ValidatorConfig& cfg) {
  auto scorer = make_scorer(cfg);
  return validate(flag, q, r, cfg, *scorer);
}

BatchValidation validate_batch(std::span<const FlaggedInstance> flags, const ValidatorConfig& cfg,
                               const TaskScorer& scorer) {
  cfg.validate();
  std::vector<ValidationOutcome> outcomes(flags.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < flags.size(); i = next++) {
      const auto& f = flags[i];
      const QueryRecord q = f.query();
      outcomes[i] = validate(f, q, q.results.front(), cfg, scorer);
    }
  };
  const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.max_in_flight), flags.size());
  if (n_workers <= 1 || scorer.source() == ReportSource::Mock) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  }

  BatchValidation out;
  for (auto& o : outcomes) {
    if (o.report) out.reports.push_back(std::move(*o.report));
    if (o.failure) out.failures.push_back(std::move(*o.failure));
  }
  return out;
}

BatchValidation validate_batch(std::span<const FlaggedInstance> flags, const ValidatorConfig& cfg) {
  auto scorer = make_scorer(cfg);
  return validate_batch(flags, cfg, *scorer);
}

void apply_validation(std::vector<FlaggedInstance>& flags, const BatchValidation& batch) {
  std::unordered_map<std::string, const ValidationReport*> reports;
  for (const auto& r : batch.reports) reports[r.flag_id] = &r;
  std::unordered_map<std::string, const ValidationFailure*> failures;
  for (const auto& f : batch.failures) failures[f.flag_id] = &f;
  for (auto& f : flags) {
    if (auto it = reports.find(f.flag_id); it != reports.end()) {
      const FlagStatus next = verdict_for(it->second->aggregate_v);
      if (f.status == FlagStatus::Pending) f.status = next;
      f.error.reset();
    } else if (auto fit = failures.find(f.flag_id); fit != failures.end()) {
      f.error = fit->second->error;
    }
  }
}

}  // namespace modguard

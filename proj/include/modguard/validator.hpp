#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "modguard/model.hpp"

namespace modguard {

// Every task score is benign-confidence: 1 means the flag is a false positive
// (content is fine for this query), 0 means a genuine violation.
inline constexpr std::string_view kQueryIrrelevancy = "query_irrelevancy";
inline constexpr std::string_view kAgeEstimation = "age_estimation";
inline constexpr std::string_view kPolicyViolation = "policy_violation";
inline constexpr std::string_view kCotJudgment = "cot_judgment";

// Token the mock oracle treats as "this pair is a real violation".
inline constexpr std::string_view kViolationMarker = "mgviolation";

struct ValidationTask {
  std::string name;
  double weight = 0.0;
  std::string prompt_template;  // {{query}}, {{result}}, {{metadata}}
};

enum class ValidatorBackend { Mock, HttpLlm };

struct ValidatorConfig {
  ValidatorBackend backend = ValidatorBackend::Mock;
  std::optional<std::string> endpoint;  // full URL of the chat-completions route
  std::optional<std::string> model_name;
  std::optional<std::string> api_key_env;  // env var holding a bearer token
  std::chrono::milliseconds timeout{30000};
  int max_retries = 2;
  std::chrono::milliseconds backoff{250};  // doubled after each failed attempt
  int max_in_flight = 4;
  std::vector<ValidationTask> tasks = default_tasks();

  static std::vector<ValidationTask> default_tasks();

  void validate() const;
};

void to_json(json& j, const ValidatorConfig& c);
void from_json(const json& j, ValidatorConfig& c);

const std::string& builtin_prompt(std::string_view task_name);
const std::string& system_prompt();

// Substitutes the placeholders of a task template.
std::string render_prompt(const std::string& tmpl, const FlaggedInstance& flag, const QueryRecord& q,
                          const ResultRecord& r);

struct TaskJudgment {
  double score = 0.0;
  std::string rationale;
};

class TaskScorer {
 public:
  virtual ~TaskScorer() = default;
  // Throws BackendError when no trustworthy score can be produced.
  virtual TaskJudgment score(const ValidationTask& task, const FlaggedInstance& flag, const QueryRecord& q,
                             const ResultRecord& r) const = 0;
  virtual ReportSource source() const = 0;
};

// Deterministic stand-in for the LLM: a violation marker in the result title or
// metadata scores near 0, anything else near 1, each with ±0.05 hash jitter.
class MockOracle final : public TaskScorer {
 public:
  TaskJudgment score(const ValidationTask& task, const FlaggedInstance& flag, const QueryRecord& q,
                     const ResultRecord& r) const override;
  ReportSource source() const override { return ReportSource::Mock; }
};

// One chat-completion request per task; expects the model's message content to
// be {"score": float, "rationale": str}.
class HttpLlmScorer final : public TaskScorer {
 public:
  explicit HttpLlmScorer(ValidatorConfig cfg);

  TaskJudgment score(const ValidationTask& task, const FlaggedInstance& flag, const QueryRecord& q,
                     const ResultRecord& r) const override;
  ReportSource source() const override { return ReportSource::Llm; }

 private:
  ValidatorConfig cfg_;
  std::string scheme_host_port_;
  std::string path_;
  std::optional<std::string> api_key_;
};

std::unique_ptr<TaskScorer> make_scorer(const ValidatorConfig& cfg);

// Parses an OpenAI-style chat-completion body; throws BackendError on anything
// that is not a single score in [0,1].
TaskJudgment parse_llm_reply(std::string_view body);

// aggregate_v >= 0.5 releases the flag.
FlagStatus verdict_for(double aggregate_v);

struct ValidationFailure {
  std::string flag_id;
  std::string error;
};

struct ValidationOutcome {
  std::optional<ValidationReport> report;
  std::optional<ValidationFailure> failure;
};

// Weighted sum of per-task scores; no report is produced if any task fails.
ValidationOutcome validate(const FlaggedInstance& flag, const QueryRecord& q, const ResultRecord& r,
                           const ValidatorConfig& cfg, const TaskScorer& scorer);
ValidationOutcome validate(const FlaggedInstance& flag, const QueryRecord& q, const ResultRecord& r,
                           const ValidatorConfig& cfg);

struct BatchValidation {
  std::vector<ValidationReport> reports;    // input order
  std::vector<ValidationFailure> failures;  // input order
};

// Validates each flag from its own query/result context with at most
// cfg.max_in_flight concurrent scorer calls.
BatchValidation validate_batch(std::span<const FlaggedInstance> flags, const ValidatorConfig& cfg,
                               const TaskScorer& scorer);
BatchValidation validate_batch(std::span<const FlaggedInstance> flags, const ValidatorConfig& cfg);

// Writes report verdicts (VALIDATED_TP / VALIDATED_FP) and failure notes back
// onto the flags, matched by flag_id.
void apply_validation(std::vector<FlaggedInstance>& flags, const BatchValidation& batch);

}  // namespace modguard

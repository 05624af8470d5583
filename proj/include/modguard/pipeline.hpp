#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "modguard/embedder.hpp"
#include "modguard/filter.hpp"
#include "modguard/lexicon.hpp"
#include "modguard/metrics.hpp"
#include "modguard/model.hpp"
#include "modguard/store.hpp"
#include "modguard/validator.hpp"

namespace modguard {

struct PipelineConfig {
  FilterConfig filter;
  ValidatorConfig validator;
  EmbedderConfig embedder;
  double alpha = 0.5;  // S(L,t) blend and feedback retention
  std::filesystem::path lexicon_path;
  std::vector<std::string> categories = default_categories();
  int epochs_per_week = 7;
  std::uint64_t seed = 0;

  void validate() const;
};

// Relative paths inside the document resolve against `base_dir`.
PipelineConfig config_from_json(const json& j, const std::filesystem::path& base_dir);
json config_to_json(const PipelineConfig& cfg);
// Throws ConfigError if the file is missing or invalid.
PipelineConfig load_config(const std::filesystem::path& path);

// Stage names in execution order; the audit log records them in this order.
inline constexpr std::array<std::string_view, 7> kStageOrder = {
    "ingest", "observe_epoch", "filter_batch", "validate_batch", "apply_feedback", "summarize", "snapshot"};

struct EpochSummary {
  std::int64_t epoch = 0;
  int week = 1;
  std::size_t records = 0;
  std::vector<LineError> malformed_lines;
  std::size_t lexicons = 0;
  std::size_t new_lexicons = 0;
  FilterStats filter;
  std::size_t validated = 0;
  std::size_t validation_failures = 0;
  std::size_t validated_tp = 0;
  std::size_t validated_fp = 0;
  std::size_t feedback_batch_size = 0;
  std::size_t human_verdicts = 0;
  std::size_t lexicons_updated = 0;
  WeeklyMetrics epoch_metrics;  // this epoch's flags only
};

json to_json(const EpochSummary& s);

struct EpochInputs {
  std::int64_t epoch = 0;
  LexiconState previous;  // state sealed with epoch - 1, or the bootstrap state
  std::vector<QueryRecord> records;
  std::vector<LineError> malformed_lines;
  std::vector<Lexicon> lexicon_additions;  // lexicons absent from `previous`
  std::vector<VerdictRecord> verdicts;     // recorded after epoch - 1 was sealed
  std::unordered_map<std::string, FlaggedInstance> verdict_flags;
};

struct EpochComputation {
  LexiconState state;  // after frequency refresh and feedback
  std::vector<FlaggedInstance> flags;
  std::vector<ValidationReport> reports;
  std::vector<ValidationFailure> failures;
  std::vector<json> audit;
  EpochSummary summary;
};

// ingest (done by the caller) -> observe_epoch -> filter_batch ->
// validate_batch -> apply_feedback -> summarize. Pure given its inputs.
EpochComputation compute_epoch(const EpochInputs& inputs, const PipelineConfig& cfg, const Embedder& embedder,
                               const TaskScorer& scorer);

// Assembles inputs for the next epoch of `store` from a log file.
EpochInputs prepare_epoch(std::int64_t epoch, const std::filesystem::path& log_path, const PipelineConfig& cfg,
                          const Store& store);

// Runs and commits the next epoch. Nothing is written unless every stage
// succeeds.
EpochSummary run_epoch(const std::filesystem::path& log_path, const PipelineConfig& cfg, Store& store);

// Recomputes epoch n from the store's epoch n-1 snapshot and the verdicts
// recorded after it, writing the sealed files into `out_dir`. The store is
// not modified.
EpochSnapshot replay_epoch(std::int64_t epoch, const std::filesystem::path& log_path, const PipelineConfig& cfg,
                           const Store& store, const std::filesystem::path& out_dir);

// Weekly metrics for everything in the store, human verdicts applied.
std::vector<WeeklyMetrics> store_weekly_metrics(const Store& store, int epochs_per_week);

}  // namespace modguard

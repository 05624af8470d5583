#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "modguard/embedder.hpp"
#include "modguard/lexicon.hpp"
#include "modguard/model.hpp"

namespace modguard {

struct FilterConfig {
  double similarity_threshold = 0.35;     // T_s: gate is s >= T_s
  double flag_threshold = 0.6;            // β
  std::optional<double> upper_similarity;  // when set, also require s <= upper
  int top_k = 5;

  // Throws ConfigError when a field is out of range.
  void validate() const;
};

void to_json(json& j, const FilterConfig& c);
void from_json(const json& j, FilterConfig& c);

// Flags produced for one query, in rank order. `epoch` is stamped on each flag.
std::vector<FlaggedInstance> filter_query(const QueryRecord& record, const LexiconState& state,
                                          const Embedder& embedder, const FilterConfig& cfg, std::int64_t epoch);

struct RecordError {
  std::string query_id;
  std::string message;
};

struct FilterStats {
  std::size_t queries = 0;
  std::size_t results_seen = 0;
  std::size_t gated_out = 0;  // failed the similarity gate
  std::size_t scored = 0;
  std::size_t flagged = 0;
  std::vector<RecordError> errors;
};

void to_json(json& j, const FilterStats& s);

struct FilterBatchResult {
  std::vector<FlaggedInstance> flags;
  FilterStats stats;
};

// Runs filter_query over every record. Records that fail validate_record are
// skipped and reported in stats.errors; configuration errors propagate.
FilterBatchResult filter_batch(std::span<const QueryRecord> records, const LexiconState& state,
                               const Embedder& embedder, const FilterConfig& cfg, std::int64_t epoch);

}  // namespace modguard

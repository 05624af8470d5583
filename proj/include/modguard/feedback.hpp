#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "modguard/lexicon.hpp"
#include "modguard/model.hpp"
#include "modguard/store.hpp"

namespace modguard {

// One validated flag as seen by the feedback update.
struct FeedbackEntry {
  std::string flag_id;
  std::vector<std::string> lexicons;  // result + metadata matches only
  double v = 0.0;                     // benign-confidence in [0,1]
  ReportSource source = ReportSource::Mock;
};

struct FeedbackBatch {
  std::int64_t epoch = 0;
  double alpha = 0.5;
  std::vector<FeedbackEntry> entries;

  std::size_t batch_size() const { return entries.size(); }
};

// Builds the batch for `epoch`: one entry per reported flag of the epoch, plus
// one per flag named in `verdicts`. A human verdict replaces the report's
// aggregate_v with 1 (HUMAN_FP) or 0 (HUMAN_TP); the latest verdict per flag
// wins. `verdict_flags` resolves flags from earlier epochs.
FeedbackBatch assemble_feedback_batch(std::int64_t epoch, double alpha, std::span<const FlaggedInstance> flags,
                                      std::span<const ValidationReport> reports,
                                      std::span<const VerdictRecord> verdicts,
                                      const std::unordered_map<std::string, FlaggedInstance>& verdict_flags);

// Mean v over entries attributed to the lexicon; nullopt when none are.
std::optional<double> lexicon_mean_v(const FeedbackBatch& batch, std::string_view lexicon_id);

struct ScoreChange {
  std::string lexicon_id;
  double old_score = 0.0;
  double new_score = 0.0;
  double mean_v = 0.0;
  std::size_t n_reports = 0;
};

void to_json(json& j, const ScoreChange& c);

struct FeedbackResult {
  LexiconState state;
  std::vector<ScoreChange> changes;  // lexicon order of the state
};

// S ← α·S + (1 − α)·(1 − V̄) for every lexicon the batch mentions; the result
// is stored as that lexicon's override. Other lexicons are untouched. The
// state's epoch must equal the batch epoch and is kept as is.
FeedbackResult apply_feedback(const LexiconState& state, const FeedbackBatch& batch);

struct VerdictOutcome {
  FlaggedInstance flag;  // with the new effective status
  VerdictRecord record;
  bool duplicate = false;
};

// Records a HUMAN_TP / HUMAN_FP verdict. A flag that already carries a human
// verdict only accepts a new one that names it in `supersedes`; otherwise
// ConflictError. Unknown flag -> NotFoundError.
VerdictOutcome ingest_human_verdict(Store& store, const std::string& flag_id, FlagStatus verdict,
                                    const std::string& reviewer_id, const std::string& timestamp,
                                    const std::optional<std::string>& supersedes = std::nullopt);

}  // namespace modguard

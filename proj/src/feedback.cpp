#include "modguard/feedback.hpp"

#include <algorithm>
#include <map>

#include "modguard/error.hpp"
#include "modguard/hash.hpp"

namespace modguard {

FeedbackBatch assemble_feedback_batch(std::int64_t epoch, double alpha, std::span<const FlaggedInstance> flags,
                                      std::span<const ValidationReport> reports,
                                      std::span<const VerdictRecord> verdicts,
                                      const std::unordered_map<std::string, FlaggedInstance>& verdict_flags) {
  FeedbackBatch batch;
  batch.epoch = epoch;
  batch.alpha = alpha;

  const auto human = latest_verdicts(verdicts);
  std::unordered_map<std::string, const ValidationReport*> by_flag;
  for (const auto& r : reports) by_flag[r.flag_id] = &r;

  std::unordered_map<std::string, bool> covered;
  for (const auto& f : flags) {
    auto h = human.find(f.flag_id);
    auto r = by_flag.find(f.flag_id);
    if (h != human.end()) {
      batch.entries.push_back({f.flag_id, f.matched_lexicons.attributable(),
                               h->second.verdict == FlagStatus::HumanFp ? 1.0 : 0.0, ReportSource::Human});
    } else if (r != by_flag.end()) {
      batch.entries.push_back({f.flag_id, f.matched_lexicons.attributable(), r->second->aggregate_v, r->second->source});
    } else {
      continue;
    }
    covered[f.flag_id] = true;
  }

  // Verdicts on flags from earlier epochs, in the order they were recorded.
  std::unordered_map<std::string, bool> emitted;
  for (const auto& v : verdicts) {
    if (covered.count(v.flag_id) != 0 || emitted.count(v.flag_id) != 0) continue;
    auto f = verdict_flags.find(v.flag_id);
    if (f == verdict_flags.end()) throw NotFoundError("verdict references unknown flag '" + v.flag_id + "'");
    const auto& latest = human.at(v.flag_id);
    batch.entries.push_back({v.flag_id, f->second.matched_lexicons.attributable(),
                             latest.verdict == FlagStatus::HumanFp ? 1.0 : 0.0, ReportSource::Human});
    emitted[v.flag_id] = true;
  }
  return batch;
}

std::optional<double> lexicon_mean_v(const FeedbackBatch& batch, std::string_view lexicon_id) {
  // Sum per distinct value with its multiplicity, smallest first. Duplicating
  // the batch doubles every multiplicity and so doubles each term exactly,
  // which keeps the mean bit-identical.
  std::map<double, std::size_t> multiplicity;
  std::size_t n = 0;
  for (const auto& e : batch.entries) {
    if (std::find(e.lexicons.begin(), e.lexicons.end(), lexicon_id) == e.lexicons.end()) continue;
    ++multiplicity[e.v];
    ++n;
  }
  if (n == 0) return std::nullopt;
  double sum = 0.0;
  for (const auto& [v, count] : multiplicity) sum += v * static_cast<double>(count);
  return std::clamp(sum / static_cast<double>(n), 0.0, 1.0);
}

void to_json(json& j, const ScoreChange& c) {
  j = json{{"lexicon_id", c.lexicon_id},
           {"old", c.old_score},
           {"new", c.new_score},
           {"mean_v", c.mean_v},
           {"n_reports", c.n_reports}};
}

FeedbackResult apply_feedback(const LexiconState& state, const FeedbackBatch& batch) {
  const double alpha = batch.alpha;
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("feedback alpha must lie in [0,1]");
  if (state.epoch() != batch.epoch) {
    throw ValidationError("feedback batch for epoch " + std::to_string(batch.epoch) + " applied to state at epoch " +
                          std::to_string(state.epoch()));
  }

  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& e : batch.entries) {
    for (const auto& id : e.lexicons) ++counts[id];
  }

  FeedbackResult out{state, {}};
  std::vector<LexiconEntry> entries = state.entries();
  for (auto& entry : entries) {
    const auto& id = entry.lexicon.lexicon_id;
    auto mean = lexicon_mean_v(batch, id);
    if (!mean) continue;
    const double old_score = sensitivity(id, state);
    const double updated = std::clamp(alpha * old_score + (1.0 - alpha) * (1.0 - *mean), 0.0, 1.0);
    entry.override_score = updated;
    out.changes.push_back({id, old_score, updated, *mean, counts[id]});
  }
  out.state = LexiconState(state.epoch(), state.alpha(), std::move(entries));
  return out;
}

VerdictOutcome ingest_human_verdict(Store& store, const std::string& flag_id, FlagStatus verdict,
                                    const std::string& reviewer_id, const std::string& timestamp,
                                    const std::optional<std::string>& supersedes) {
  if (!is_human(verdict)) throw ValidationError("verdict must be HUMAN_TP or HUMAN_FP");
  if (reviewer_id.empty()) throw ValidationError("reviewer_id is required");
  if (!is_rfc3339(timestamp)) throw ValidationError("timestamp is not RFC 3339: " + timestamp);

  FlaggedInstance flag = store.load_flag(flag_id);
  const auto latest_epoch = store.latest_epoch();

  VerdictRecord record;
  record.flag_id = flag_id;
  record.verdict = verdict;
  record.reviewer_id = reviewer_id;
  record.timestamp = timestamp;
  record.supersedes = supersedes;
  record.recorded_after_epoch = *latest_epoch;
  std::string key = flag_id + '\x1f' + std::string(to_string(verdict)) + '\x1f' + reviewer_id + '\x1f' + timestamp +
                    '\x1f' + supersedes.value_or("") + '\x1f' + std::to_string(record.recorded_after_epoch);
  record.verdict_id = "v-" + hex64(mix64(fnv1a64(key)));

  const auto all = store.all_verdicts();
  for (const auto& v : all) {
    if (v.verdict_id == record.verdict_id) {
      flag.status = v.verdict;
      return VerdictOutcome{std::move(flag), v, true};
    }
  }
  const auto latest = latest_verdicts(all);
  const FlagStatus current = effective_status(flag, latest);
  if (auto it = latest.find(flag_id); it != latest.end()) {
    if (!supersedes || *supersedes != it->second.verdict_id) {
      throw ConflictError("flag '" + flag_id + "' already has human verdict " + it->second.verdict_id +
                          "; submit a superseding verdict naming it");
    }
  } else if (supersedes) {
    throw ConflictError("flag '" + flag_id + "' has no verdict to supersede");
  }
  if (!can_transition(current, verdict)) {
    throw ConflictError("status " + std::string(to_string(current)) + " cannot move to " +
                        std::string(to_string(verdict)));
  }

  store.append_verdict(record);
  flag.status = verdict;
  return VerdictOutcome{std::move(flag), std::move(record), false};
}

}  // namespace modguard

#include "modguard/filter.hpp"

#include <cmath>

#include "modguard/error.hpp"
#include "modguard/text.hpp"

namespace modguard {

void FilterConfig::validate() const {
  if (!(similarity_threshold >= -1.0 && similarity_threshold <= 1.0)) {
    throw ConfigError("similarity_threshold must lie in [-1,1]");
  }
  if (!(flag_threshold > 0.0 && flag_threshold < 1.0)) throw ConfigError("flag_threshold must lie in (0,1)");
  if (upper_similarity && !(*upper_similarity >= similarity_threshold)) {
    throw ConfigError("upper_similarity must be >= similarity_threshold");
  }
  if (top_k <= 0) throw ConfigError("top_k must be positive");
}

void to_json(json& j, const FilterConfig& c) {
  j = json{{"similarity_threshold", c.similarity_threshold},
           {"flag_threshold", c.flag_threshold},
           {"top_k", c.top_k},
           {"upper_similarity", c.upper_similarity ? json(*c.upper_similarity) : json(nullptr)}};
}

void from_json(const json& j, FilterConfig& c) {
  c = FilterConfig{};
  c.similarity_threshold = j.value("similarity_threshold", c.similarity_threshold);
  c.flag_threshold = j.value("flag_threshold", c.flag_threshold);
  c.top_k = j.value("top_k", c.top_k);
  if (auto it = j.find("upper_similarity"); it != j.end() && !it->is_null()) c.upper_similarity = it->get<double>();
}

void to_json(json& j, const FilterStats& s) {
  json errors = json::array();
  for (const auto& e : s.errors) errors.push_back({{"query_id", e.query_id}, {"message", e.message}});
  j = json{{"queries", s.queries},         {"results_seen", s.results_seen}, {"gated_out", s.gated_out},
           {"scored", s.scored},           {"flagged", s.flagged},           {"errors", std::move(errors)}};
}

namespace {

struct QueryOutcome {
  std::vector<FlaggedInstance> flags;
  std::size_t seen = 0;
  std::size_t gated = 0;
  std::size_t scored = 0;
};

QueryOutcome run_query(const QueryRecord& record, const LexiconState& state, const Embedder& embedder,
                       const FilterConfig& cfg, std::int64_t epoch) {
  QueryOutcome out;
  const std::string query_text = text::normalize(record.text);
  const EmbeddingVector v_query = embedder.embed(query_text);

  // Query score does not depend on r; computed once, only when a result passes.
  std::optional<LexiconMatchSet> query_matches;
  double g_query = 0.0;

  const std::size_t limit = std::min(record.results.size(), static_cast<std::size_t>(cfg.top_k));
  for (std::size_t i = 0; i < limit; ++i) {
    const ResultRecord& r = record.results[i];
    ++out.seen;
    const std::string title = text::normalize(r.title);
    const double s = cosine(v_query, embedder.embed(title, &r.metadata));
    const bool relevant = s >= cfg.similarity_threshold && (!cfg.upper_similarity || s <= *cfg.upper_similarity);
    if (!relevant) {
      ++out.gated;
      continue;
    }
    ++out.scored;
    if (!query_matches) {
      query_matches = match(query_text, state, Surface::Query);
      g_query = aggregate_g(*query_matches, state);
    }
    const LexiconMatchSet result_matches = match(title, state, Surface::Result);
    const LexiconMatchSet metadata_matches = match_metadata(r.metadata, state);
    const double g_result = aggregate_g(result_matches, state);
    const double g_metadata = aggregate_g(metadata_matches, state);

    const double beta = cfg.flag_threshold;
    if (g_query < beta && (g_result > beta || g_metadata > beta)) {
      FlaggedInstance f;
      f.flag_id = make_flag_id(epoch, record.query_id, r.result_id);
      f.query_id = record.query_id;
      f.result_id = r.result_id;
      f.epoch = epoch;
      f.scores = FlagScores{s, g_query, g_result, g_metadata};
      f.matched_lexicons = MatchedLexicons{query_matches->matches, result_matches.matches, metadata_matches.matches};
      f.status = FlagStatus::Pending;
      f.timestamp = record.timestamp;
      f.query_text = record.text;
      f.result_title = r.title;
      f.rank = r.rank;
      f.metadata = r.metadata;
      out.flags.push_back(std::move(f));
    }
  }
  return out;
}

}  // namespace

std::vector<FlaggedInstance> filter_query(const QueryRecord& record, const LexiconState& state,
                                          const Embedder& embedder, const FilterConfig& cfg, std::int64_t epoch) {
  cfg.validate();
  return run_query(record, state, embedder, cfg, epoch).flags;
}

FilterBatchResult filter_batch(std::span<const QueryRecord> records, const LexiconState& state,
                               const Embedder& embedder, const FilterConfig& cfg, std::int64_t epoch) {
  cfg.validate();
  FilterBatchResult out;
  for (const auto& record : records) {
    ++out.stats.queries;
    const auto violations = validate_record(record);
    if (!violations.empty()) {
      std::string msg;
      for (const auto& v : violations) {
        if (!msg.empty()) msg.append("; ");
        msg.append(to_string(v.code));
        msg.append(": ");
        msg.append(v.detail);
      }
      out.stats.errors.push_back({record.query_id, std::move(msg)});
      continue;
    }
    auto q = run_query(record, state, embedder, cfg, epoch);
    out.stats.results_seen += q.seen;
    out.stats.gated_out += q.gated;
    out.stats.scored += q.scored;
    out.stats.flagged += q.flags.size();
    for (auto& f : q.flags) out.flags.push_back(std::move(f));
  }
  return out;
}

}  // namespace modguard

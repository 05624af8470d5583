#include "modguard/lexicon.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "modguard/error.hpp"
#include "modguard/text.hpp"

namespace modguard {
namespace {

std::string token_key(const std::vector<std::string>& tokens) {
  std::string key;
  for (const auto& t : tokens) {
    if (!key.empty()) key.push_back(' ');
    key.append(t);
  }
  return key;
}

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0,1], got " + std::to_string(alpha));
}

}  // namespace

const std::vector<std::string>& default_categories() {
  static const std::vector<std::string> categories = {"offensive", "sexist", "xenophobic", "racist",
                                                      "violent",   "sexual", "mature",     "controversial"};
  return categories;
}

// --- LexiconState -----------------------------------------------------------------

LexiconState::LexiconState(std::int64_t epoch, double alpha, std::vector<LexiconEntry> entries)
    : epoch_(epoch), alpha_(alpha), entries_(std::move(entries)) {
  check_alpha(alpha_);
  std::unordered_set<std::string> keys;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.lexicon.lexicon_id.empty()) throw ValidationError("lexicon id is empty");
    if (!by_id_.emplace(e.lexicon.lexicon_id, i).second) {
      throw ValidationError("duplicate lexicon id '" + e.lexicon.lexicon_id + "'");
    }
    auto tokens = text::tokenize(text::normalize(e.lexicon.term));
    if (tokens.empty()) throw ValidationError("lexicon '" + e.lexicon.lexicon_id + "' has an empty term");
    if (!keys.insert(token_key(tokens)).second) {
      throw ValidationError("lexicon term '" + e.lexicon.term + "' is not unique after normalization");
    }
    if (e.override_score && !(*e.override_score >= 0.0 && *e.override_score <= 1.0)) {
      throw ValidationError("override score of '" + e.lexicon.lexicon_id + "' outside [0,1]");
    }
    total_f0_ += e.f0;
    total_ft_ += e.f_t;
  }
  index_ = std::make_shared<const LexiconIndex>(entries_);
}

const LexiconEntry* LexiconState::find(std::string_view lexicon_id) const {
  auto it = by_id_.find(std::string(lexicon_id));
  return it == by_id_.end() ? nullptr : &entries_[it->second];
}

const LexiconEntry& LexiconState::at(std::string_view lexicon_id) const {
  const auto* e = find(lexicon_id);
  if (e == nullptr) throw NotFoundError("unknown lexicon '" + std::string(lexicon_id) + "'");
  return *e;
}

double LexiconState::frequency_score(std::string_view lexicon_id) const {
  const auto& e = at(lexicon_id);
  return sensitivity_formula(alpha_, e.f0, total_f0_, e.f_t, total_ft_);
}

LexiconState LexiconState::with_epoch(std::int64_t epoch) const {
  LexiconState copy = *this;
  copy.epoch_ = epoch;
  return copy;
}

LexiconState LexiconState::with_counts(const std::unordered_map<std::string, std::uint64_t>& f_t) const {
  std::vector<LexiconEntry> next = entries_;
  for (auto& e : next) {
    auto it = f_t.find(e.lexicon.lexicon_id);
    e.f_t = it == f_t.end() ? 0 : it->second;
  }
  return LexiconState(epoch_, alpha_, std::move(next));
}

LexiconState LexiconState::with_override(std::string_view lexicon_id, double score) const {
  std::vector<LexiconEntry> next = entries_;
  auto it = by_id_.find(std::string(lexicon_id));
  if (it == by_id_.end()) throw NotFoundError("unknown lexicon '" + std::string(lexicon_id) + "'");
  next[it->second].override_score = score;
  return LexiconState(epoch_, alpha_, std::move(next));
}

LexiconState LexiconState::with_new_lexicons(std::span<const Lexicon> lexicons) const {
  std::vector<LexiconEntry> next = entries_;
  for (const auto& lex : lexicons) {
    if (find(lex.lexicon_id) != nullptr) continue;
    LexiconEntry e;
    e.lexicon = lex;
    e.f0 = 1;
    next.push_back(std::move(e));
  }
  return LexiconState(epoch_, alpha_, std::move(next));
}

// --- LexiconIndex -----------------------------------------------------------------

LexiconIndex::LexiconIndex(std::span<const LexiconEntry> entries) {
  for (const auto& e : entries) {
    auto tokens = text::tokenize(text::normalize(e.lexicon.term));
    if (tokens.empty()) continue;
    by_first_token_[tokens.front()].push_back(Term{e.lexicon.lexicon_id, std::move(tokens)});
  }
}

std::vector<std::string> LexiconIndex::match_tokens(std::span<const std::string> tokens) const {
  std::vector<std::string> out;
  std::unordered_set<std::string_view> seen;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto it = by_first_token_.find(tokens[i]);
    if (it == by_first_token_.end()) continue;
    for (const auto& term : it->second) {
      if (i + term.tokens.size() > tokens.size()) continue;
      if (!std::equal(term.tokens.begin(), term.tokens.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
        continue;
      }
      if (seen.insert(term.lexicon_id).second) out.push_back(term.lexicon_id);
    }
  }
  return out;
}

void LexiconIndex::count_tokens(std::span<const std::string> tokens,
                                std::unordered_map<std::string, std::uint64_t>& counts) const {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto it = by_first_token_.find(tokens[i]);
    if (it == by_first_token_.end()) continue;
    for (const auto& term : it->second) {
      if (i + term.tokens.size() > tokens.size()) continue;
      if (std::equal(term.tokens.begin(), term.tokens.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
        ++counts[term.lexicon_id];
      }
    }
  }
}

// --- scoring ----------------------------------------------------------------------

double sensitivity_formula(double alpha, std::uint64_t f0, std::uint64_t total_f0, std::uint64_t f_t,
                           std::uint64_t total_ft) {
  const double baseline_share = total_f0 > 0 ? static_cast<double>(f0) / static_cast<double>(total_f0) : 0.0;
  const double current_share = total_ft > 0 ? static_cast<double>(f_t) / static_cast<double>(total_ft) : 0.0;
  const double s = alpha * (1.0 - baseline_share) + (1.0 - alpha) * current_share;
  return std::clamp(s, 0.0, 1.0);
}

LexiconMatchSet match(std::string_view normalized_text, const LexiconState& state, Surface surface) {
  const auto tokens = text::tokenize(normalized_text);
  return LexiconMatchSet{surface, state.index().match_tokens(tokens)};
}

namespace {

// Field token lists of the metadata surface, normalized.
std::vector<std::vector<std::string>> metadata_fields(const MetadataRecord& metadata) {
  std::vector<std::vector<std::string>> fields;
  if (metadata.description) fields.push_back(text::tokenize(text::normalize(*metadata.description)));
  if (metadata.genre) {
    for (const auto& g : *metadata.genre) fields.push_back(text::tokenize(text::normalize(g)));
  }
  if (metadata.age_rating) fields.push_back(text::tokenize(text::normalize(*metadata.age_rating)));
  return fields;
}

}  // namespace

LexiconMatchSet match_metadata(const MetadataRecord& metadata, const LexiconState& state) {
  LexiconMatchSet out{Surface::Metadata, {}};
  std::unordered_set<std::string> seen;
  for (const auto& field : metadata_fields(metadata)) {
    for (auto& id : state.index().match_tokens(field)) {
      if (seen.insert(id).second) out.matches.push_back(std::move(id));
    }
  }
  return out;
}

double sensitivity(std::string_view lexicon_id, const LexiconState& state) {
  const auto& e = state.at(lexicon_id);
  if (e.override_score) return *e.override_score;
  return sensitivity_formula(state.alpha(), e.f0, state.total_f0(), e.f_t, state.total_ft());
}

double aggregate_g(const LexiconMatchSet& matchset, const LexiconState& state) {
  if (matchset.matches.empty()) return 0.0;
  double sum = 0.0;
  double lo = 1.0;
  double hi = 0.0;
  for (const auto& id : matchset.matches) {
    const double s = sensitivity(id, state);
    sum += s;
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  // Rounding in the sum can push the mean a hair outside its members' range.
  return std::clamp(sum / static_cast<double>(matchset.matches.size()), lo, hi);
}

LexiconState observe_epoch(std::span<const QueryRecord> records, const LexiconState& state) {
  std::unordered_map<std::string, std::uint64_t> counts;
  const auto& index = state.index();
  for (const auto& q : records) {
    index.count_tokens(text::tokenize(text::normalize(q.text)), counts);
    for (const auto& r : q.results) {
      index.count_tokens(text::tokenize(text::normalize(r.title)), counts);
      for (const auto& field : metadata_fields(r.metadata)) index.count_tokens(field, counts);
    }
  }
  return state.with_counts(counts).with_epoch(state.epoch() + 1);
}

// --- files ------------------------------------------------------------------------

std::vector<LexiconFileEntry> parse_lexicon_lines(std::string_view content, std::span<const std::string> categories) {
  std::vector<LexiconFileEntry> out;
  std::unordered_set<std::string> ids;
  std::unordered_set<std::string> keys;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (text::is_blank(line)) continue;
    const std::string where = "lexicon file line " + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw ValidationError(where + ": " + e.what());
    }
    LexiconFileEntry entry;
    try {
      entry.lexicon.lexicon_id = j.at("lexicon_id").get<std::string>();
      entry.lexicon.term = text::normalize(j.at("term").get<std::string>());
      entry.lexicon.category = j.at("category").get<std::string>();
      if (j.contains("f0") && !j["f0"].is_null()) {
        const auto f0 = j["f0"].get<std::int64_t>();
        if (f0 < 0) throw ValidationError("f0 must be >= 0");
        entry.f0 = static_cast<std::uint64_t>(f0);
      }
      entry.lexicon.added_at_epoch = j.value("added_at_epoch", std::int64_t{0});
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    } catch (const std::exception& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (std::find(categories.begin(), categories.end(), entry.lexicon.category) == categories.end()) {
      throw ValidationError(where + ": category '" + entry.lexicon.category + "' is not configured");
    }
    auto tokens = text::tokenize(entry.lexicon.term);
    if (tokens.empty()) throw ValidationError(where + ": empty term");
    if (!ids.insert(entry.lexicon.lexicon_id).second) {
      throw ValidationError(where + ": duplicate lexicon_id '" + entry.lexicon.lexicon_id + "'");
    }
    if (!keys.insert(token_key(tokens)).second) {
      throw ValidationError(where + ": term '" + entry.lexicon.term + "' duplicates an earlier term");
    }
    out.push_back(std::move(entry));
  }
  return out;
}

std::vector<LexiconFileEntry> load_lexicon_file(const std::filesystem::path& path,
                                                std::span<const std::string> categories) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read lexicon file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_lexicon_lines(buf.str(), categories);
}

LexiconState bootstrap_state(std::span<const LexiconFileEntry> lexicons, double alpha) {
  std::vector<LexiconEntry> entries;
  entries.reserve(lexicons.size());
  for (const auto& l : lexicons) {
    LexiconEntry e;
    e.lexicon = l.lexicon;
    e.f0 = l.f0.value_or(1);
    entries.push_back(std::move(e));
  }
  return LexiconState(LexiconState::kBootstrapEpoch, alpha, std::move(entries));
}

json state_to_json(const LexiconState& state) {
  json entries = json::array();
  for (const auto& e : state.entries()) {
    entries.push_back({{"lexicon_id", e.lexicon.lexicon_id},
                       {"term", e.lexicon.term},
                       {"category", e.lexicon.category},
                       {"added_at_epoch", e.lexicon.added_at_epoch},
                       {"f0", e.f0},
                       {"f_t", e.f_t},
                       {"score", sensitivity(e.lexicon.lexicon_id, state)},
                       {"overridden", e.override_score.has_value()}});
  }
  return json{{"epoch", state.epoch()}, {"alpha", state.alpha()}, {"entries", std::move(entries)}};
}

LexiconState state_from_json(const json& j) {
  std::vector<LexiconEntry> entries;
  for (const auto& item : j.at("entries")) {
    LexiconEntry e;
    e.lexicon.lexicon_id = item.at("lexicon_id").get<std::string>();
    e.lexicon.term = item.at("term").get<std::string>();
    e.lexicon.category = item.at("category").get<std::string>();
    e.lexicon.added_at_epoch = item.value("added_at_epoch", std::int64_t{0});
    e.f0 = item.at("f0").get<std::uint64_t>();
    e.f_t = item.at("f_t").get<std::uint64_t>();
    if (item.value("overridden", false)) e.override_score = item.at("score").get<double>();
    entries.push_back(std::move(e));
  }
  return LexiconState(j.at("epoch").get<std::int64_t>(), j.at("alpha").get<double>(), std::move(entries));
}

}  // namespace modguard

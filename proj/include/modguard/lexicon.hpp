#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "modguard/model.hpp"

namespace modguard {

struct Lexicon {
  std::string lexicon_id;
  std::string term;  // normalized
  std::string category;
  std::int64_t added_at_epoch = 0;

  bool operator==(const Lexicon&) const = default;
};

struct LexiconEntry {
  Lexicon lexicon;
  std::uint64_t f0 = 0;   // baseline count f(L, 0)
  std::uint64_t f_t = 0;  // current-epoch count f(L, t)
  // Score written by the feedback loop. Once present it is the lexicon's
  // sensitivity until the next feedback update replaces it.
  std::optional<double> override_score;

  bool operator==(const LexiconEntry&) const = default;
};

struct LexiconMatchSet {
  Surface surface = Surface::Query;
  std::vector<std::string> matches;  // lexicon ids, first occurrence order

  std::size_t n() const { return matches.size(); }
};

class LexiconIndex;

// Immutable snapshot of the lexicon set with its counts and overrides.
// "Mutating" operations return a new snapshot.
class LexiconState {
 public:
  // Epoch of a state built straight from a lexicon file, before any day of
  // logs has been observed. The first observed epoch is 0.
  static constexpr std::int64_t kBootstrapEpoch = -1;

  LexiconState() : LexiconState(kBootstrapEpoch, 0.5, {}) {}
  LexiconState(std::int64_t epoch, double alpha, std::vector<LexiconEntry> entries);

  std::int64_t epoch() const { return epoch_; }
  double alpha() const { return alpha_; }
  const std::vector<LexiconEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  const LexiconEntry* find(std::string_view lexicon_id) const;
  const LexiconEntry& at(std::string_view lexicon_id) const;

  std::uint64_t total_f0() const { return total_f0_; }
  std::uint64_t total_ft() const { return total_ft_; }

  // S(L, t) from the frequency shares alone, ignoring any override.
  double frequency_score(std::string_view lexicon_id) const;

  const LexiconIndex& index() const { return *index_; }

  LexiconState with_epoch(std::int64_t epoch) const;
  LexiconState with_counts(const std::unordered_map<std::string, std::uint64_t>& f_t) const;
  LexiconState with_override(std::string_view lexicon_id, double score) const;
  // Adds lexicons not yet present, each with f0 = 1. Terms colliding with an
  // existing term are rejected.
  LexiconState with_new_lexicons(std::span<const Lexicon> lexicons) const;

  bool operator==(const LexiconState& o) const {
    return epoch_ == o.epoch_ && alpha_ == o.alpha_ && entries_ == o.entries_;
  }

 private:
  std::int64_t epoch_;
  double alpha_;
  std::vector<LexiconEntry> entries_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::uint64_t total_f0_ = 0;
  std::uint64_t total_ft_ = 0;
  std::shared_ptr<const LexiconIndex> index_;
};

// Token-sequence index over lexicon terms.
class LexiconIndex {
 public:
  explicit LexiconIndex(std::span<const LexiconEntry> entries);

  // Whole-token, contiguous matches, each lexicon reported once.
  std::vector<std::string> match_tokens(std::span<const std::string> tokens) const;
  // Every occurrence counted (overlapping occurrences of the same term too).
  void count_tokens(std::span<const std::string> tokens, std::unordered_map<std::string, std::uint64_t>& counts) const;

 private:
  struct Term {
    std::string lexicon_id;
    std::vector<std::string> tokens;
  };
  std::unordered_map<std::string, std::vector<Term>> by_first_token_;
};

// α(1 − f0/Σf0) + (1 − α)·f_t/Σf_t with zero-sum shares defined as 0.
double sensitivity_formula(double alpha, std::uint64_t f0, std::uint64_t total_f0, std::uint64_t f_t,
                           std::uint64_t total_ft);

LexiconMatchSet match(std::string_view normalized_text, const LexiconState& state, Surface surface = Surface::Query);
// Metadata surface: description, genres, and age rating matched as separate
// fields (no phrase spans a field boundary), results unioned.
LexiconMatchSet match_metadata(const MetadataRecord& metadata, const LexiconState& state);

// Override if one exists, otherwise the frequency-share formula.
double sensitivity(std::string_view lexicon_id, const LexiconState& state);

// Mean sensitivity over the match set; 0 for an empty set.
double aggregate_g(const LexiconMatchSet& matchset, const LexiconState& state);

// Counts occurrences across query text, result titles, and metadata of every
// record, replaces f_t, advances the epoch by one. f0 and overrides persist.
LexiconState observe_epoch(std::span<const QueryRecord> records, const LexiconState& state);

// Lexicon file: JSON lines {"lexicon_id","term","category","f0"}.
struct LexiconFileEntry {
  Lexicon lexicon;
  std::optional<std::uint64_t> f0;
};

std::vector<LexiconFileEntry> load_lexicon_file(const std::filesystem::path& path,
                                                std::span<const std::string> categories);
std::vector<LexiconFileEntry> parse_lexicon_lines(std::string_view content, std::span<const std::string> categories);

// Fresh state for epoch bootstrap; a missing f0 becomes 1.
LexiconState bootstrap_state(std::span<const LexiconFileEntry> lexicons, double alpha);

// Snapshot document {epoch, alpha, entries:[{lexicon_id, term, category,
// added_at_epoch, f0, f_t, score, overridden}]}.
json state_to_json(const LexiconState& state);
LexiconState state_from_json(const json& j);

const std::vector<std::string>& default_categories();

}  // namespace modguard

#pragma once

#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "modguard/embedder.hpp"
#include "modguard/filter.hpp"
#include "modguard/lexicon.hpp"
#include "modguard/model.hpp"

namespace modguard::testing {

using PairSet = std::set<std::pair<std::string, std::string>>;

// Naive restatement of the filtering rule, written without any of the
// library's matching, scoring or aggregation code. Only normalization,
// tokenization and the embedder are shared.
double naive_score(const LexiconState& state, const std::string& lexicon_id);
PairSet naive_flags(std::span<const QueryRecord> records, const LexiconState& state, const Embedder& embedder,
                    const FilterConfig& cfg);

PairSet flag_pairs(std::span<const FlaggedInstance> flags);

// Small randomized instance: at most 10 lexicons and 20 query-result pairs.
struct RandomInstance {
  LexiconState state;
  std::vector<QueryRecord> records;
  FilterConfig cfg;
};

RandomInstance random_instance(std::mt19937_64& rng);

}  // namespace modguard::testing

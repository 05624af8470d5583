#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "modguard/lexicon.hpp"
#include "modguard/metrics.hpp"
#include "modguard/model.hpp"
#include "modguard/pipeline.hpp"
#include "modguard/store.hpp"

namespace modguard {

// Scenario each generated query-result pair was built from.
enum class Archetype {
  Aligned,           // benign query, benign relevant result
  FpTrap,            // benign result whose title holds an over-weighted term
  IntentMismatch,    // benign query, relevant result with sensitive wording
  AudienceMismatch,  // family query, relevant result rated for adults
  SensitiveIntent,   // the user asked for sensitive content
  BenignSensitive,   // sensitive term used harmlessly
  OffTopic,          // sensitive result unrelated to the query
};

std::string_view to_string(Archetype a);

struct PlantedLabel {
  std::int64_t day = 0;
  std::string query_id;
  std::string result_id;
  Archetype archetype = Archetype::Aligned;
  bool violation = false;
};

void to_json(json& j, const PlantedLabel& l);

// Queries per day for each archetype. Result lists are padded with aligned
// results up to results_per_query.
struct GeneratorConfig {
  std::uint64_t seed = 7;
  int aligned = 50;
  int fp_trap = 18;
  int intent_mismatch = 10;
  int audience_mismatch = 6;
  int sensitive_intent = 8;
  int benign_sensitive = 2;
  int off_topic = 6;
  int results_per_query = 5;
  bool plant_violations = true;  // false drops both violation archetypes
};

struct GeneratedDay {
  std::int64_t day = 0;
  std::vector<QueryRecord> records;
  std::vector<PlantedLabel> labels;  // one per result
};

// Lexicon set used by the generator, with baseline counts.
std::vector<LexiconFileEntry> synthetic_lexicons();
// Ids of the lexicons planted only in benign contexts.
const std::vector<std::string>& planted_fp_lexicons();

// Deterministic in (cfg.seed, day); days can be generated in any order.
GeneratedDay generate_day(const GeneratorConfig& cfg, std::int64_t day);

// Thresholds tuned for the reference embedder and the generator vocabulary.
PipelineConfig simulation_pipeline_config();

struct SimulationOptions {
  int weeks = 8;
  GeneratorConfig generator;
  PipelineConfig pipeline = simulation_pipeline_config();
  bool human_review = true;  // reviewer labels each day's flags from ground truth
  // When set, epochs and verdicts go through a Store rooted here.
  std::optional<std::filesystem::path> data_dir;
};

struct SimulationRun {
  std::vector<WeeklyMetrics> weekly;
  std::vector<LexiconState> states;               // sealed state per epoch
  std::vector<std::vector<FlaggedInstance>> flags;  // per epoch, as validated
  std::vector<VerdictRecord> verdicts;
  std::vector<EpochSummary> summaries;
};

SimulationRun simulate(const SimulationOptions& opts);
std::vector<WeeklyMetrics> run_simulation(int weeks, const GeneratorConfig& cfg);

// Writes lexicons.jsonl, config.json, day-NNN.jsonl and labels.jsonl into out.
void write_fixtures(const std::filesystem::path& out, const GeneratorConfig& cfg, int days);

// Weekly (TP, FP) counts of the eight-week production evaluation.
struct WeekCounts {
  std::size_t tp;
  std::size_t fp;
};
inline constexpr std::array<WeekCounts, 8> kReferenceWeeklyCounts = {
    {{168, 2780}, {230, 2924}, {171, 3977}, {211, 3392}, {216, 3330}, {234, 2901}, {213, 2745}, {371, 2139}}};

// Populates an empty store with 56 epochs whose validated flags reproduce
// kReferenceWeeklyCounts week by week.
void write_weekly_counts_fixture(Store& store);

}  // namespace modguard

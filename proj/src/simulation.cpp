#include "modguard/simulation.hpp"

#include <algorithm>
#include <cctype>
#include <ctime>
#include <fstream>
#include <random>
#include <unordered_map>

#include "modguard/error.hpp"
#include "modguard/feedback.hpp"
#include "modguard/hash.hpp"

namespace modguard {

namespace fs = std::filesystem;

namespace {

struct Topic {
  const char* query;
  const char* genre;
  bool family;
  const char* fp_title;    // benign title holding an over-weighted term, or null
  const char* fp_lexicon;  // id of that term
};

// Vocabulary avoids every lexicon term except in the planted fp titles.
constexpr Topic kTopics[] = {
    {"whale documentary", "Documentary", false, "Killer Whale Documentary", "lx-killer"},
    {"meteor shower guide", "Science", false, "Shooting Stars Meteor Shower Guide", "lx-shooting"},
    {"brunch cocktail recipes", "Cooking", false, "Bloody Mary Brunch Cocktail Recipes", "lx-bloody"},
    {"chicken wings recipe", "Cooking", false, "Hot Chicken Wings Recipe", "lx-hot"},
    {"italian cooking show", "Cooking", false, "The Naked Chef Italian Cooking Show", "lx-naked"},
    {"newspaper comics history", "Documentary", false, "Comic Strip Newspaper Comics History", "lx-strip"},
    {"kids cartoon adventures", "Animation", true, nullptr, nullptr},
    {"family baking contest", "Reality", true, nullptr, nullptr},
    {"space exploration series", "Science", false, nullptr, nullptr},
    {"football highlights", "Sports", false, nullptr, nullptr},
    {"jazz concert live", "Music", false, nullptr, nullptr},
    {"mountain travel vlog", "Travel", false, nullptr, nullptr},
    {"ancient rome history", "History", false, nullptr, nullptr},
    {"gardening tips", "Lifestyle", true, nullptr, nullptr},
};
constexpr std::size_t kFpTopics = 6;

constexpr const char* kSuffixes[] = {"Season One", "Special", "Extended Edition", "Collection", "Part Two",
                                     "Marathon",   "Returns", "Uncovered",        "Weekend",    "Classics"};

struct TermSpec {
  const char* id;
  const char* term;
  const char* category;
  std::uint64_t f0;
};

constexpr TermSpec kViolationTerms[] = {
    {"lx-scandals", "scandals", "controversial", 3},
    {"lx-adult-themes", "adult themes", "mature", 3},
    {"lx-toxic-stereotypes", "toxic stereotypes", "xenophobic", 3},
    {"lx-graphic-violence", "graphic violence", "violent", 3},
    {"lx-explicit", "explicit", "sexual", 3},
    {"lx-ethnic-slurs", "ethnic slurs", "racist", 3},
    {"lx-misogynist", "misogynist", "sexist", 3},
    {"lx-profanity", "profanity", "offensive", 3},
};

// Rare in the baseline, so they start with the highest scores.
constexpr TermSpec kOverweightedTerms[] = {
    {"lx-killer", "killer", "violent", 1}, {"lx-shooting", "shooting", "violent", 1},
    {"lx-bloody", "bloody", "offensive", 1}, {"lx-hot", "hot", "sexual", 1},
    {"lx-naked", "naked", "sexual", 1},    {"lx-strip", "strip", "sexual", 1},
};

constexpr TermSpec kIntentTerms[] = {
    {"lx-horror", "horror", "mature", 2},
    {"lx-true-crime", "true crime", "violent", 2},
};

constexpr const char* kSensitiveQueries[] = {"horror movie night", "true crime documentaries"};
constexpr const char* kQueryPrefixes[] = {"", "watch ", "best ", "new "};

std::string title_case(std::string_view s) {
  std::string out(s);
  bool start = true;
  for (char& c : out) {
    if (start && std::isalpha(static_cast<unsigned char>(c))) c = static_cast<char>(std::toupper(c));
    start = c == ' ';
  }
  return out;
}

std::string date_string(std::int64_t day, int minute_of_day) {
  constexpr std::time_t kBase = 1767571200;  // 2026-01-05T00:00:00Z
  const std::time_t t = kBase + static_cast<std::time_t>(day) * 86400 + minute_of_day * 60;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class DayBuilder {
 public:
  DayBuilder(const GeneratorConfig& cfg, std::int64_t day)
      : cfg_(cfg), day_(day), rng_(mix64(cfg.seed ^ mix64(static_cast<std::uint64_t>(day) + 0x5eed))) {
    out_.day = day;
  }

  std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }

  // Daily volume varies by up to a fifth around the configured count.
  int jitter(int n) {
    if (n <= 0) return 0;
    const int spread = n / 5;
    return n - spread + static_cast<int>(pick(static_cast<std::size_t>(2 * spread + 1)));
  }

  const Topic& topic(bool fp_only = false, bool family_only = false) {
    for (;;) {
      const Topic& t = kTopics[fp_only ? pick(kFpTopics) : pick(std::size(kTopics))];
      if (!family_only || t.family) return t;
    }
  }

  // Starts a query; planted results are inserted, the rest padded as aligned.
  void add_query(const std::string& text, const Topic* anchor, std::vector<std::pair<ResultRecord, PlantedLabel>> planted) {
    QueryRecord q;
    const std::size_t n = out_.records.size();
    q.query_id = "d" + std::to_string(day_) + "-q" + std::to_string(n);
    q.text = text;
    q.timestamp = date_string(day_, static_cast<int>((n * 7) % 1440));

    const auto slots = static_cast<std::size_t>(std::max(cfg_.results_per_query, 1));
    std::vector<std::optional<std::pair<ResultRecord, PlantedLabel>>> list(slots);
    for (auto& p : planted) {
      std::size_t at = pick(slots);
      while (list[at]) at = (at + 1) % slots;
      list[at] = std::move(p);
    }
    std::vector<std::size_t> suffix(std::size(kSuffixes));
    for (std::size_t i = 0; i < suffix.size(); ++i) suffix[i] = i;
    std::size_t next_suffix = 0;
    for (std::size_t i = suffix.size(); i > 1; --i) std::swap(suffix[i - 1], suffix[pick(i)]);
    const Topic& pad = anchor != nullptr ? *anchor : topic();
    for (std::size_t i = 0; i < slots; ++i) {
      if (!list[i]) {
        ResultRecord r;
        r.title = title_case(pad.query) + " " + kSuffixes[suffix[next_suffix++ % suffix.size()]];
        r.metadata.description = "Episodes about " + std::string(pad.query) + ".";
        r.metadata.genre = std::vector<std::string>{pad.genre};
        r.metadata.age_rating = pad.family ? "TV-G" : "TV-PG";
        list[i] = std::make_pair(std::move(r), PlantedLabel{day_, {}, {}, Archetype::Aligned, false});
      }
      auto& [r, label] = *list[i];
      r.rank = static_cast<int>(i) + 1;
      r.result_id = "t" + hex64(mix64(fnv1a64(r.title + '\x1f' + r.metadata.description.value_or(""))));
      label.query_id = q.query_id;
      label.result_id = r.result_id;
      q.results.push_back(r);
      out_.labels.push_back(label);
    }
    out_.records.push_back(std::move(q));
  }

  std::string query_text(const char* base) { return std::string(kQueryPrefixes[pick(std::size(kQueryPrefixes))]) + base; }

  std::pair<ResultRecord, PlantedLabel> planted(Archetype a, bool violation, std::string title, std::string description,
                                                std::string genre, std::string rating) {
    ResultRecord r;
    r.title = std::move(title);
    r.metadata.description = std::move(description);
    r.metadata.genre = std::vector<std::string>{std::move(genre)};
    r.metadata.age_rating = std::move(rating);
    return {std::move(r), PlantedLabel{day_, {}, {}, a, violation}};
  }

  GeneratedDay build() {
    const std::string marker(kViolationMarker);
    for (int i = 0, n = jitter(cfg_.aligned); i < n; ++i) {
      const Topic& t = topic();
      add_query(query_text(t.query), &t, {});
    }
    for (int i = 0, n = jitter(cfg_.fp_trap); i < n; ++i) {
      const Topic& t = topic(true);
      add_query(query_text(t.query), &t,
                {planted(Archetype::FpTrap, false, t.fp_title, "Episodes about " + std::string(t.query) + ".", t.genre,
                         "TV-G")});
    }
    if (cfg_.plant_violations) {
      for (int i = 0, n = jitter(cfg_.intent_mismatch); i < n; ++i) {
        const Topic& t = topic();
        const TermSpec& v = kViolationTerms[pick(std::size(kViolationTerms))];
        add_query(query_text(t.query), &t,
                  {planted(Archetype::IntentMismatch, true, title_case(t.query) + ": " + title_case(v.term) + " Cut",
                           "Features " + std::string(v.term) + " " + marker + ".", t.genre, "TV-14")});
      }
      for (int i = 0, n = jitter(cfg_.audience_mismatch); i < n; ++i) {
        const Topic& t = topic(false, true);
        const TermSpec& v = kViolationTerms[pick(std::size(kViolationTerms))];
        add_query(query_text(t.query), &t,
                  {planted(Archetype::AudienceMismatch, true, title_case(t.query) + " After Dark",
                           std::string(v.term) + " " + marker + ".", t.genre, "TV-MA")});
      }
    }
    for (int i = 0, n = jitter(cfg_.sensitive_intent); i < n; ++i) {
      const char* q = kSensitiveQueries[pick(std::size(kSensitiveQueries))];
      const TermSpec& v = kViolationTerms[pick(std::size(kViolationTerms))];
      add_query(query_text(q), nullptr,
                {planted(Archetype::SensitiveIntent, false, title_case(q) + ": " + title_case(v.term) + " Special",
                         "Features " + std::string(v.term) + ".", "Thriller", "TV-MA")});
    }
    for (int i = 0, n = jitter(cfg_.benign_sensitive); i < n; ++i) {
      const Topic& t = topic();
      const TermSpec& v = kViolationTerms[pick(std::size(kViolationTerms))];
      add_query(query_text(t.query), &t,
                {planted(Archetype::BenignSensitive, false,
                         title_case(t.query) + ": Lessons On " + title_case(v.term),
                         "Episodes about " + std::string(t.query) + ".", t.genre, "TV-PG")});
    }
    for (int i = 0, n = jitter(cfg_.off_topic); i < n; ++i) {
      const Topic& t = topic();
      const TermSpec& v = kViolationTerms[pick(std::size(kViolationTerms))];
      const bool violation = cfg_.plant_violations;
      add_query(query_text(t.query), &t,
                {planted(Archetype::OffTopic, violation, "Midnight Underground Reel " + std::to_string(pick(90) + 10),
                         std::string(v.term) + (violation ? " " + marker : std::string()) + ".", "Thriller",
                         "TV-MA")});
    }
    return std::move(out_);
  }

 private:
  const GeneratorConfig& cfg_;
  std::int64_t day_;
  std::mt19937_64 rng_;
  GeneratedDay out_;
};

VerdictRecord simulated_verdict(const FlaggedInstance& f, bool violation, std::int64_t day) {
  VerdictRecord v;
  v.flag_id = f.flag_id;
  v.verdict = violation ? FlagStatus::HumanTp : FlagStatus::HumanFp;
  v.reviewer_id = "sim-reviewer";
  v.timestamp = date_string(day, 23 * 60 + 30);
  v.recorded_after_epoch = day;
  v.verdict_id = "v-" + hex64(mix64(fnv1a64(f.flag_id + '\x1f' + std::to_string(day))));
  return v;
}

}  // namespace

std::string_view to_string(Archetype a) {
  switch (a) {
    case Archetype::Aligned: return "aligned";
    case Archetype::FpTrap: return "fp_trap";
    case Archetype::IntentMismatch: return "intent_mismatch";
    case Archetype::AudienceMismatch: return "audience_mismatch";
    case Archetype::SensitiveIntent: return "sensitive_intent";
    case Archetype::BenignSensitive: return "benign_sensitive";
    case Archetype::OffTopic: return "off_topic";
  }
  return "aligned";
}

void to_json(json& j, const PlantedLabel& l) {
  j = json{{"day", l.day},
           {"query_id", l.query_id},
           {"result_id", l.result_id},
           {"archetype", to_string(l.archetype)},
           {"violation", l.violation}};
}

std::vector<LexiconFileEntry> synthetic_lexicons() {
  std::vector<LexiconFileEntry> out;
  auto add = [&](const TermSpec& t) { out.push_back({Lexicon{t.id, t.term, t.category, 0}, t.f0}); };
  for (const auto& t : kViolationTerms) add(t);
  for (const auto& t : kOverweightedTerms) add(t);
  for (const auto& t : kIntentTerms) add(t);
  return out;
}

const std::vector<std::string>& planted_fp_lexicons() {
  static const std::vector<std::string> ids = [] {
    std::vector<std::string> v;
    for (const auto& t : kOverweightedTerms) v.emplace_back(t.id);
    return v;
  }();
  return ids;
}

GeneratedDay generate_day(const GeneratorConfig& cfg, std::int64_t day) {
  if (cfg.results_per_query < 1) throw ConfigError("results_per_query must be positive");
  return DayBuilder(cfg, day).build();
}

PipelineConfig simulation_pipeline_config() {
  PipelineConfig cfg;
  cfg.alpha = 0.9;
  cfg.filter.flag_threshold = 0.6;
  cfg.filter.similarity_threshold = 0.17;
  cfg.filter.top_k = 5;
  cfg.epochs_per_week = 7;
  return cfg;
}

SimulationRun simulate(const SimulationOptions& opts) {
  if (opts.weeks < 0) throw ConfigError("weeks must not be negative");
  const PipelineConfig& cfg = opts.pipeline;
  cfg.validate();
  SimulationRun run;
  if (opts.weeks == 0) return run;

  std::optional<Store> store;
  if (opts.data_dir) {
    store.emplace(*opts.data_dir);
    if (store->latest_epoch()) throw ConfigError("simulation data dir must be empty: " + opts.data_dir->string());
  }

  const auto lexicons = synthetic_lexicons();
  const auto embedder = make_embedder(cfg.embedder);
  const auto scorer = make_scorer(cfg.validator);
  LexiconState previous = bootstrap_state(lexicons, cfg.alpha);
  std::vector<VerdictRecord> pending;
  std::unordered_map<std::string, FlaggedInstance> pending_flags;

  const std::int64_t days = static_cast<std::int64_t>(opts.weeks) * cfg.epochs_per_week;
  for (std::int64_t day = 0; day < days; ++day) {
    GeneratedDay gen = generate_day(opts.generator, day);
    EpochInputs inputs;
    inputs.epoch = day;
    inputs.previous = previous;
    inputs.records = std::move(gen.records);
    inputs.verdicts = std::move(pending);
    inputs.verdict_flags = std::move(pending_flags);
    pending.clear();
    pending_flags.clear();

    EpochComputation c = compute_epoch(inputs, cfg, *embedder, *scorer);
    if (store) store->commit_epoch(day, c.state, c.flags, c.reports, c.audit, to_json(c.summary));

    if (opts.human_review) {
      std::unordered_map<std::string, bool> truth;
      for (const auto& l : gen.labels) truth[l.query_id + '\x1f' + l.result_id] = l.violation;
      for (const auto& f : c.flags) {
        const bool violation = truth.at(f.query_id + '\x1f' + f.result_id);
        VerdictRecord v = simulated_verdict(f, violation, day);
        if (store) v = ingest_human_verdict(*store, f.flag_id, v.verdict, v.reviewer_id, v.timestamp).record;
        pending.push_back(v);
        pending_flags.emplace(f.flag_id, f);
        run.verdicts.push_back(std::move(v));
      }
    }

    previous = c.state;
    run.states.push_back(std::move(c.state));
    run.flags.push_back(std::move(c.flags));
    run.summaries.push_back(std::move(c.summary));
  }

  std::vector<FlaggedInstance> all;
  for (const auto& day : run.flags) all.insert(all.end(), day.begin(), day.end());
  run.weekly = summarize_weeks(all, cfg.epochs_per_week, latest_verdicts(run.verdicts), days - 1);
  return run;
}

std::vector<WeeklyMetrics> run_simulation(int weeks, const GeneratorConfig& cfg) {
  SimulationOptions opts;
  opts.weeks = weeks;
  opts.generator = cfg;
  return simulate(opts).weekly;
}

namespace {

void write_lines(const fs::path& path, const std::vector<json>& lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& l : lines) out << l.dump() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

void write_fixtures(const fs::path& out, const GeneratorConfig& cfg, int days) {
  if (days < 0) throw ConfigError("days must not be negative");
  fs::create_directories(out);

  std::vector<json> lex;
  for (const auto& e : synthetic_lexicons()) {
    lex.push_back({{"lexicon_id", e.lexicon.lexicon_id},
                   {"term", e.lexicon.term},
                   {"category", e.lexicon.category},
                   {"f0", *e.f0}});
  }
  write_lines(out / "lexicons.jsonl", lex);

  PipelineConfig pc = simulation_pipeline_config();
  pc.lexicon_path = "lexicons.jsonl";
  pc.seed = cfg.seed;
  {
    std::ofstream c(out / "config.json", std::ios::binary | std::ios::trunc);
    if (!c) throw IoError("cannot write config.json");
    c << config_to_json(pc).dump(2) << '\n';
  }

  std::vector<json> labels;
  for (int d = 0; d < days; ++d) {
    GeneratedDay g = generate_day(cfg, d);
    std::vector<json> lines;
    for (const auto& r : g.records) lines.emplace_back(r);
    char name[32];
    std::snprintf(name, sizeof name, "day-%03d.jsonl", d);
    write_lines(out / name, lines);
    for (const auto& l : g.labels) labels.emplace_back(l);
  }
  write_lines(out / "labels.jsonl", labels);
}

void write_weekly_counts_fixture(Store& store) {
  if (store.latest_epoch()) throw ConfigError("table fixture needs an empty store");
  const auto lexicons = synthetic_lexicons();
  const LexiconState base = bootstrap_state(lexicons, 0.9);
  const ValidatorConfig vcfg;
  constexpr int kDays = 7;

  for (std::size_t w = 0; w < kReferenceWeeklyCounts.size(); ++w) {
    const auto [tp, fp] = kReferenceWeeklyCounts[w];
    for (int d = 0; d < kDays; ++d) {
      const auto epoch = static_cast<std::int64_t>(w) * kDays + d;
      const auto share = [&](std::size_t n) { return n / kDays + (static_cast<std::size_t>(d) < n % kDays ? 1 : 0); };
      const std::size_t n_tp = share(tp);
      const std::size_t n_fp = share(fp);

      std::vector<FlaggedInstance> flags;
      std::vector<ValidationReport> reports;
      for (std::size_t i = 0; i < n_tp + n_fp; ++i) {
        const bool is_tp = i < n_tp;
        const auto& lex = is_tp ? kViolationTerms[i % std::size(kViolationTerms)]
                                : kOverweightedTerms[i % std::size(kOverweightedTerms)];
        FlaggedInstance f;
        f.query_id = "e" + std::to_string(epoch) + "-q" + std::to_string(i);
        f.result_id = "e" + std::to_string(epoch) + "-r" + std::to_string(i);
        f.flag_id = make_flag_id(epoch, f.query_id, f.result_id);
        f.epoch = epoch;
        f.scores = FlagScores{0.5, 0.0, 0.8, 0.0};
        f.matched_lexicons.result = {lex.id};
        f.status = is_tp ? FlagStatus::ValidatedTp : FlagStatus::ValidatedFp;
        f.timestamp = date_string(epoch, static_cast<int>(i % 1440));
        f.query_text = "fixture query " + std::to_string(i);
        f.result_title = "Fixture Title " + std::to_string(i) + " " + title_case(lex.term);
        f.rank = static_cast<int>(i % 5) + 1;

        ValidationReport r;
        r.flag_id = f.flag_id;
        const double v = is_tp ? 0.1 : 0.9;
        for (const auto& t : vcfg.tasks) {
          r.task_scores[t.name] = v;
          r.weights[t.name] = t.weight;
        }
        for (const auto& t : vcfg.tasks) r.aggregate_v += t.weight * v;
        r.source = ReportSource::Mock;
        flags.push_back(std::move(f));
        reports.push_back(std::move(r));
      }
      const json summary{{"epoch", epoch}, {"week", w + 1}, {"fixture", "weekly-counts"}};
      store.commit_epoch(epoch, base.with_epoch(epoch), flags, reports, {}, summary);
    }
  }
}

}  // namespace modguard

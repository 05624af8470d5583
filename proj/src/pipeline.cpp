#include "modguard/pipeline.hpp"

#include <fstream>
#include <sstream>

#include "modguard/error.hpp"
#include "modguard/feedback.hpp"

namespace modguard {

namespace fs = std::filesystem;

void PipelineConfig::validate() const {
  filter.validate();
  validator.validate();
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0,1]");
  if (epochs_per_week < 1) throw ConfigError("epochs_per_week must be positive");
  if (embedder.dim <= 0) throw ConfigError("embedder.dim must be positive");
  if (categories.empty()) throw ConfigError("at least one lexicon category is required");
}

PipelineConfig config_from_json(const json& j, const fs::path& base_dir) {
  PipelineConfig cfg;
  try {
    if (j.contains("filter")) cfg.filter = j.at("filter").get<FilterConfig>();
    if (j.contains("validator")) cfg.validator = j.at("validator").get<ValidatorConfig>();
    if (j.contains("embedder")) {
      const auto& e = j.at("embedder");
      cfg.embedder.kind = e.value("kind", cfg.embedder.kind);
      cfg.embedder.dim = e.value("dim", cfg.embedder.dim);
    }
    cfg.alpha = j.value("alpha", cfg.alpha);
    if (j.contains("lexicon_path")) {
      fs::path p = j.at("lexicon_path").get<std::string>();
      cfg.lexicon_path = p.is_absolute() ? p : base_dir / p;
    }
    if (j.contains("categories")) cfg.categories = j.at("categories").get<std::vector<std::string>>();
    cfg.epochs_per_week = j.value("epochs_per_week", cfg.epochs_per_week);
    cfg.seed = j.value("seed", cfg.seed);
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json config_to_json(const PipelineConfig& cfg) {
  return json{{"filter", cfg.filter},
              {"validator", cfg.validator},
              {"embedder", {{"kind", cfg.embedder.kind}, {"dim", cfg.embedder.dim}}},
              {"alpha", cfg.alpha},
              {"lexicon_path", cfg.lexicon_path.string()},
              {"categories", cfg.categories},
              {"epochs_per_week", cfg.epochs_per_week},
              {"seed", cfg.seed}};
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j, fs::absolute(path).parent_path());
}

json to_json(const EpochSummary& s) {
  json malformed = json::array();
  for (const auto& e : s.malformed_lines) malformed.push_back({{"line", e.line}, {"message", e.message}});
  return json{{"epoch", s.epoch},
              {"week", s.week},
              {"ingest", {{"records", s.records}, {"skipped_lines", s.malformed_lines.size()}, {"errors", malformed}}},
              {"lexicons", {{"total", s.lexicons}, {"added", s.new_lexicons}}},
              {"filter", s.filter},
              {"validation",
               {{"validated", s.validated},
                {"failures", s.validation_failures},
                {"tp", s.validated_tp},
                {"fp", s.validated_fp}}},
              {"feedback",
               {{"batch_size", s.feedback_batch_size},
                {"human_verdicts", s.human_verdicts},
                {"lexicons_updated", s.lexicons_updated}}},
              {"metrics", s.epoch_metrics}};
}

namespace {

json stage_event(std::size_t seq, std::string_view stage, json detail) {
  return json{{"type", "stage"}, {"seq", seq}, {"stage", stage}, {"detail", std::move(detail)}};
}

}  // namespace

EpochComputation compute_epoch(const EpochInputs& inputs, const PipelineConfig& cfg, const Embedder& embedder,
                               const TaskScorer& scorer) {
  cfg.validate();
  EpochComputation out;
  EpochSummary& summary = out.summary;
  summary.epoch = inputs.epoch;
  summary.week = static_cast<int>(inputs.epoch / cfg.epochs_per_week) + 1;
  std::size_t seq = 0;

  // ingest
  summary.records = inputs.records.size();
  summary.malformed_lines = inputs.malformed_lines;
  out.audit.push_back(stage_event(seq++, kStageOrder[0],
                                  {{"records", inputs.records.size()}, {"skipped_lines", inputs.malformed_lines.size()}}));

  // observe_epoch
  std::vector<Lexicon> additions = inputs.lexicon_additions;
  for (auto& l : additions) l.added_at_epoch = inputs.epoch;
  const LexiconState widened = inputs.previous.with_new_lexicons(additions);
  const LexiconState observed = observe_epoch(inputs.records, widened);
  if (observed.epoch() != inputs.epoch) {
    throw ValidationError("previous state is at epoch " + std::to_string(inputs.previous.epoch()) +
                          ", cannot produce epoch " + std::to_string(inputs.epoch));
  }
  summary.lexicons = observed.size();
  summary.new_lexicons = observed.size() - inputs.previous.size();
  out.audit.push_back(stage_event(seq++, kStageOrder[1],
                                  {{"lexicons", observed.size()},
                                   {"added", summary.new_lexicons},
                                   {"total_f0", observed.total_f0()},
                                   {"total_ft", observed.total_ft()}}));

  // filter_batch
  FilterBatchResult filtered = filter_batch(inputs.records, observed, embedder, cfg.filter, inputs.epoch);
  summary.filter = filtered.stats;
  out.audit.push_back(stage_event(seq++, kStageOrder[2], json(filtered.stats)));
  out.flags = std::move(filtered.flags);

  // validate_batch
  BatchValidation validation = validate_batch(out.flags, cfg.validator, scorer);
  apply_validation(out.flags, validation);
  summary.validated = validation.reports.size();
  summary.validation_failures = validation.failures.size();
  for (const auto& f : out.flags) {
    if (f.status == FlagStatus::ValidatedTp) ++summary.validated_tp;
    if (f.status == FlagStatus::ValidatedFp) ++summary.validated_fp;
  }
  out.audit.push_back(stage_event(seq++, kStageOrder[3],
                                  {{"reports", validation.reports.size()},
                                   {"failures", validation.failures.size()},
                                   {"tp", summary.validated_tp},
                                   {"fp", summary.validated_fp}}));
  out.reports = std::move(validation.reports);
  out.failures = std::move(validation.failures);

  // apply_feedback
  const FeedbackBatch batch = assemble_feedback_batch(inputs.epoch, cfg.alpha, out.flags, out.reports, inputs.verdicts,
                                                      inputs.verdict_flags);
  FeedbackResult fb = apply_feedback(observed, batch);
  summary.feedback_batch_size = batch.batch_size();
  summary.human_verdicts = inputs.verdicts.size();
  summary.lexicons_updated = fb.changes.size();
  out.audit.push_back(stage_event(seq++, kStageOrder[4],
                                  {{"batch_size", batch.batch_size()},
                                   {"human_verdicts", inputs.verdicts.size()},
                                   {"lexicons_updated", fb.changes.size()}}));
  for (const auto& change : fb.changes) {
    json j = change;
    j["type"] = "score_change";
    j["epoch"] = inputs.epoch;
    out.audit.push_back(std::move(j));
  }
  out.state = std::move(fb.state);

  // summarize
  summary.epoch_metrics = summarize(out.flags, summary.week, cfg.epochs_per_week);
  out.audit.push_back(stage_event(seq++, kStageOrder[5], json(summary.epoch_metrics)));

  out.audit.push_back(stage_event(seq++, kStageOrder[6], {{"epoch", inputs.epoch}}));
  return out;
}

EpochInputs prepare_epoch(std::int64_t epoch, const fs::path& log_path, const PipelineConfig& cfg,
                          const Store& store) {
  EpochInputs inputs;
  inputs.epoch = epoch;
  const auto lexicons = load_lexicon_file(cfg.lexicon_path, cfg.categories);
  if (epoch == 0) {
    inputs.previous = bootstrap_state(lexicons, cfg.alpha);
  } else {
    inputs.previous = store.load_epoch(epoch - 1).state;
    for (const auto& l : lexicons) {
      if (inputs.previous.find(l.lexicon.lexicon_id) == nullptr) inputs.lexicon_additions.push_back(l.lexicon);
    }
    inputs.verdicts = store.verdicts_after(epoch - 1);
    for (const auto& v : inputs.verdicts) {
      if (inputs.verdict_flags.count(v.flag_id) == 0) inputs.verdict_flags.emplace(v.flag_id, store.load_flag(v.flag_id));
    }
  }
  IngestResult ingested = ingest_query_log(log_path, cfg.filter.top_k);
  inputs.records = std::move(ingested.records);
  inputs.malformed_lines = std::move(ingested.errors);
  return inputs;
}

EpochSummary run_epoch(const fs::path& log_path, const PipelineConfig& cfg, Store& store) {
  cfg.validate();
  const auto latest = store.latest_epoch();
  const std::int64_t epoch = latest ? *latest + 1 : 0;
  const EpochInputs inputs = prepare_epoch(epoch, log_path, cfg, store);
  const auto embedder = make_embedder(cfg.embedder);
  const auto scorer = make_scorer(cfg.validator);
  EpochComputation result = compute_epoch(inputs, cfg, *embedder, *scorer);
  store.commit_epoch(epoch, result.state, result.flags, result.reports, result.audit, to_json(result.summary));
  return result.summary;
}

EpochSnapshot replay_epoch(std::int64_t epoch, const fs::path& log_path, const PipelineConfig& cfg,
                           const Store& store, const fs::path& out_dir) {
  cfg.validate();
  const EpochInputs inputs = prepare_epoch(epoch, log_path, cfg, store);
  const auto embedder = make_embedder(cfg.embedder);
  const auto scorer = make_scorer(cfg.validator);
  EpochComputation result = compute_epoch(inputs, cfg, *embedder, *scorer);
  return write_epoch_dir(out_dir, epoch, result.state, result.flags, result.reports, result.audit,
                         to_json(result.summary));
}

std::vector<WeeklyMetrics> store_weekly_metrics(const Store& store, int epochs_per_week) {
  std::vector<FlaggedInstance> flags;
  const auto epochs = store.epochs();
  for (auto e : epochs) {
    auto data = store.load_epoch(e);
    flags.insert(flags.end(), std::make_move_iterator(data.flags.begin()), std::make_move_iterator(data.flags.end()));
  }
  const auto verdicts = store.all_verdicts();
  const auto latest = latest_verdicts(verdicts);
  return summarize_weeks(flags, epochs_per_week, latest, epochs.empty() ? -1 : epochs.back());
}

}  // namespace modguard

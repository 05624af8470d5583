#include <gtest/gtest.h>

#include "modguard/error.hpp"
#include "modguard/feedback.hpp"
#include "modguard/pipeline.hpp"
#include "modguard/simulation.hpp"
#include "support.hpp"

using namespace modguard;
using namespace modguard::testing;
namespace fs = std::filesystem;

namespace {

class PipelineTest : public ::testing::Test {
 protected:
  void SetUp() override {
    write_fixtures(dir_.path(), GeneratorConfig{}, 3);
    cfg_ = load_config(dir_ / "config.json");
  }
  fs::path day(int d) const {
    char name[32];
    std::snprintf(name, sizeof name, "day-%03d.jsonl", d);
    return dir_ / name;
  }
  std::vector<json> audit_of(const Store& s, std::int64_t epoch) const {
    std::vector<json> out;
    std::istringstream in(read_text(s.epoch_dir(epoch) / "audit.jsonl"));
    for (std::string line; std::getline(in, line);) out.push_back(json::parse(line));
    return out;
  }
  TempDir dir_;
  PipelineConfig cfg_;
};

}  // namespace

TEST_F(PipelineTest, AuditRecordsEveryStageInOrder) {
  Store store(dir_ / "data");
  const auto summary = run_epoch(day(0), cfg_, store);
  EXPECT_EQ(summary.epoch, 0);
  EXPECT_GT(summary.filter.flagged, 0u);
  std::vector<std::string> stages;
  for (const auto& a : audit_of(store, 0)) {
    if (a["type"] == "stage") stages.push_back(a["stage"]);
  }
  EXPECT_EQ(stages, std::vector<std::string>(kStageOrder.begin(), kStageOrder.end()));
  const auto data = store.load_epoch(0);
  EXPECT_EQ(data.flags.size(), summary.filter.flagged);
  EXPECT_EQ(data.reports.size(), summary.validated);
  for (const auto& f : data.flags) EXPECT_NE(f.status, FlagStatus::Pending);
}

TEST_F(PipelineTest, QuietEpochCommitsWithoutFlags) {
  write_text(dir_ / "quiet.jsonl",
             json(query("q1", "space telescopes", {result("r1", "Space telescopes of the world", 1)})).dump() + "\n");
  Store store(dir_ / "data");
  const auto s = run_epoch(dir_ / "quiet.jsonl", cfg_, store);
  EXPECT_EQ(s.filter.flagged, 0u);
  EXPECT_EQ(s.feedback_batch_size, 0u);
  EXPECT_TRUE(store.load_epoch(0).flags.empty());
  // Nothing to feed back, so scores only move through the frequency refresh.
  EXPECT_EQ(s.lexicons_updated, 0u);
}

TEST_F(PipelineTest, FailedEpochWritesNothing) {
  Store store(dir_ / "data");
  run_epoch(day(0), cfg_, store);
  const std::string line = json(query("dup", "x", {result("r", "y", 1)})).dump();
  write_text(dir_ / "bad.jsonl", line + "\n" + line + "\n");
  EXPECT_THROW(run_epoch(dir_ / "bad.jsonl", cfg_, store), ValidationError);
  EXPECT_THROW(run_epoch(dir_ / "missing.jsonl", cfg_, store), IoError);
  EXPECT_EQ(store.epochs(), (std::vector<std::int64_t>{0}));
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(store.root())) ++entries;
  EXPECT_EQ(entries, 1u);
}

TEST_F(PipelineTest, MalformedLinesAreSkippedAndCounted) {
  auto text = read_text(day(0));
  text += "{\"query_id\": \"torn\n";
  write_text(dir_ / "dirty.jsonl", text);
  Store store(dir_ / "data");
  const auto s = run_epoch(dir_ / "dirty.jsonl", cfg_, store);
  ASSERT_EQ(s.malformed_lines.size(), 1u);
  EXPECT_EQ(to_json(s)["ingest"]["skipped_lines"], 1);
}

TEST_F(PipelineTest, ReplayIsByteIdentical) {
  Store store(dir_ / "data");
  for (int d = 0; d < 3; ++d) {
    run_epoch(day(d), cfg_, store);
    if (d == 0) {
      const auto f = store.load_epoch(0).flags.front();
      ingest_human_verdict(store, f.flag_id, FlagStatus::HumanFp, "rev", "2026-01-05T20:00:00Z");
    }
  }
  for (int d = 0; d < 3; ++d) {
    const auto out = dir_ / ("replay-" + std::to_string(d));
    const auto snap = replay_epoch(d, day(d), cfg_, store, out);
    EXPECT_EQ(snap.checksums, store.snapshot(d).checksums) << "epoch " << d;
    for (auto name : kSealedFiles) {
      EXPECT_EQ(read_text(out / name), read_text(store.epoch_dir(d) / name)) << name << " epoch " << d;
    }
    EXPECT_EQ(read_text(out / "manifest.json"), read_text(store.epoch_dir(d) / "manifest.json"));
  }
  EXPECT_THROW(replay_epoch(5, day(0), cfg_, store, dir_ / "nope"), NotFoundError);
}

TEST_F(PipelineTest, HumanFalsePositiveLowersTheLexiconNextEpoch) {
  Store with(dir_ / "with");
  Store without(dir_ / "without");
  run_epoch(day(0), cfg_, with);
  run_epoch(day(0), cfg_, without);
  const auto flags = with.load_epoch(0).flags;
  const auto it = std::find_if(flags.begin(), flags.end(),
                               [](const auto& f) { return !f.matched_lexicons.attributable().empty(); });
  ASSERT_NE(it, flags.end());
  const auto lexicon = it->matched_lexicons.attributable().front();
  ingest_human_verdict(with, it->flag_id, FlagStatus::HumanFp, "rev", "2026-01-05T20:00:00Z");
  const auto s_with = run_epoch(day(1), cfg_, with);
  run_epoch(day(1), cfg_, without);
  EXPECT_EQ(s_with.human_verdicts, 1u);
  EXPECT_LT(sensitivity(lexicon, with.load_epoch(1).state), sensitivity(lexicon, without.load_epoch(1).state));
}

TEST_F(PipelineTest, ComputeEpochIsPure) {
  Store store(dir_ / "data");
  const auto inputs = prepare_epoch(0, day(0), cfg_, store);
  const auto e = make_embedder(cfg_.embedder);
  const auto s = make_scorer(cfg_.validator);
  const auto a = compute_epoch(inputs, cfg_, *e, *s);
  const auto b = compute_epoch(inputs, cfg_, *e, *s);
  EXPECT_EQ(a.state, b.state);
  EXPECT_EQ(a.flags, b.flags);
  EXPECT_EQ(a.reports, b.reports);
  EXPECT_EQ(a.audit, b.audit);
  EXPECT_EQ(a.state.epoch(), 0);
}

TEST_F(PipelineTest, NewLexiconsJoinWithUnitBaseline) {
  Store store(dir_ / "data");
  run_epoch(day(0), cfg_, store);
  auto lex = read_text(dir_ / "lexicons.jsonl");
  lex += R"({"lexicon_id":"lx-new","term":"brand new term","category":"mature"})" "\n";
  write_text(dir_ / "lexicons.jsonl", lex);
  const auto s = run_epoch(day(1), cfg_, store);
  EXPECT_EQ(s.new_lexicons, 1u);
  const auto st = store.load_epoch(1).state;
  EXPECT_EQ(st.at("lx-new").f0, 1u);
  EXPECT_EQ(st.at("lx-new").lexicon.added_at_epoch, 1);
}

TEST(PipelineConfig, RoundTripsAndRejectsBadFiles) {
  TempDir dir;
  PipelineConfig c = simulation_pipeline_config();
  c.lexicon_path = dir / "lex.jsonl";
  const auto back = config_from_json(config_to_json(c), dir.path());
  EXPECT_EQ(config_to_json(back), config_to_json(c));
  EXPECT_THROW(load_config(dir / "missing.json"), ConfigError);
  write_text(dir / "bad.json", "{ not json");
  EXPECT_THROW(load_config(dir / "bad.json"), ConfigError);
  write_text(dir / "alpha.json", R"({"alpha": 2, "lexicon_path": "x"})");
  EXPECT_THROW(load_config(dir / "alpha.json"), ConfigError);
}

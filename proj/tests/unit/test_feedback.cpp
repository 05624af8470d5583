#include <gtest/gtest.h>

#include <random>

#include "modguard/error.hpp"
#include "modguard/feedback.hpp"
#include "support.hpp"

using namespace modguard;
using namespace modguard::testing;

namespace {

FeedbackBatch batch_of(double alpha, std::vector<std::pair<std::string, double>> entries, std::int64_t epoch = 0) {
  FeedbackBatch b;
  b.epoch = epoch;
  b.alpha = alpha;
  int i = 0;
  for (auto& [lex, v] : entries) b.entries.push_back({"f" + std::to_string(i++), {lex}, v, ReportSource::Mock});
  return b;
}

double score_after(double s, double alpha, double vbar) {
  const auto st = make_state(0.5, {{"a", "scandals", 1, 0, s}});
  return sensitivity("a", apply_feedback(st, batch_of(alpha, {{"a", vbar}})).state);
}

}  // namespace

TEST(LexiconMeanV, AveragesAttributedEntriesOnly) {
  const auto b = batch_of(0.5, {{"a", 0.2}, {"a", 0.4}, {"b", 1.0}});
  EXPECT_NEAR(*lexicon_mean_v(b, "a"), 0.3, 1e-12);
  EXPECT_DOUBLE_EQ(*lexicon_mean_v(b, "b"), 1.0);
  EXPECT_FALSE(lexicon_mean_v(b, "c"));
  EXPECT_FALSE(lexicon_mean_v(FeedbackBatch{}, "a"));
}

TEST(ApplyFeedback, WorkedExample) {
  EXPECT_NEAR(score_after(0.6, 0.5, 1.0), 0.30, 1e-12);
  EXPECT_NEAR(score_after(0.6, 0.5, 0.0), 0.80, 1e-12);
  EXPECT_NEAR(score_after(0.6, 0.9, 1.0), 0.54, 1e-12);
}

TEST(ApplyFeedback, SingletonBatchUsesItsOwnValue) {
  EXPECT_NEAR(score_after(0.7, 0.25, 0.4), 0.25 * 0.7 + 0.75 * 0.6, 1e-12);
}

TEST(ApplyFeedback, AlphaOneIsTheIdentityAndAlphaZeroForgets) {
  for (double s : {0.0, 0.3, 0.99}) {
    EXPECT_DOUBLE_EQ(score_after(s, 1.0, 0.1), s);
    EXPECT_NEAR(score_after(s, 0.0, 0.1), 0.9, 1e-12);
  }
}

TEST(ApplyFeedback, UnmentionedLexiconsAreUntouched) {
  const auto st = make_state(0.5, {{"a", "scandals", 2, 3}, {"b", "gore", 1, 1}});
  const auto out = apply_feedback(st, batch_of(0.5, {{"a", 1.0}}));
  EXPECT_FALSE(out.state.at("b").override_score);
  EXPECT_DOUBLE_EQ(sensitivity("b", out.state), sensitivity("b", st));
  ASSERT_EQ(out.changes.size(), 1u);
  EXPECT_EQ(out.changes[0].lexicon_id, "a");
  EXPECT_DOUBLE_EQ(out.changes[0].old_score, sensitivity("a", st));
  EXPECT_EQ(out.changes[0].n_reports, 1u);
  EXPECT_EQ(out.state.epoch(), st.epoch());
}

TEST(ApplyFeedback, ConvergesToOneMinusMeanV) {
  for (double vbar : {0.0, 0.25, 0.8, 1.0}) {
    auto st = make_state(0.5, {{"a", "scandals", 1, 0, 0.95}});
    double prev_gap = std::abs(0.95 - (1.0 - vbar));
    for (int i = 0; i < 40; ++i) {
      st = apply_feedback(st, batch_of(0.5, {{"a", vbar}})).state;
      const double gap = std::abs(sensitivity("a", st) - (1.0 - vbar));
      EXPECT_LE(gap, prev_gap + 1e-15);
      prev_gap = gap;
    }
    EXPECT_NEAR(sensitivity("a", st), 1.0 - vbar, 1e-9);
  }
}

TEST(ApplyFeedback, FixedPointIsStable) {
  EXPECT_NEAR(score_after(0.35, 0.7, 0.65), 0.35, 1e-12);
}

TEST(ApplyFeedback, IsAContractionWithFactorAlpha) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double a = u(rng);
    const double s1 = u(rng);
    const double s2 = u(rng);
    const double v = u(rng);
    EXPECT_NEAR(std::abs(score_after(s1, a, v) - score_after(s2, a, v)), a * std::abs(s1 - s2), 1e-12);
  }
}

TEST(ApplyFeedback, DuplicatedBatchGivesIdenticalScores) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto st = make_state(0.5, {{"a", "scandals", 3, 1}, {"b", "gore", 1, 4}, {"c", "x", 2, 2}});
  for (int trial = 0; trial < 50; ++trial) {
    FeedbackBatch b;
    b.alpha = 0.9;
    for (int i = 0; i < 17; ++i) {
      std::vector<std::string> lex;
      for (const char* id : {"a", "b", "c"}) {
        if (rng() % 2) lex.emplace_back(id);
      }
      b.entries.push_back({"f" + std::to_string(i), lex, u(rng), ReportSource::Mock});
    }
    FeedbackBatch twice = b;
    twice.entries.insert(twice.entries.end(), b.entries.begin(), b.entries.end());
    const auto once_state = apply_feedback(st, b).state;
    const auto twice_state = apply_feedback(st, twice).state;
    for (const char* id : {"a", "b", "c"}) EXPECT_EQ(sensitivity(id, once_state), sensitivity(id, twice_state));
  }
}

TEST(ApplyFeedback, RejectsEpochMismatchAndBadAlpha) {
  const auto st = make_state(0.5, {{"a", "scandals"}}, 3);
  EXPECT_THROW(apply_feedback(st, batch_of(0.5, {{"a", 1.0}}, 2)), ValidationError);
  EXPECT_THROW(apply_feedback(st, batch_of(1.5, {{"a", 1.0}}, 3)), ConfigError);
}

TEST(AssembleFeedbackBatch, UsesReportsVerdictsAndAttributableMatches) {
  auto f1 = make_flag(2, "q1", "r1", {"a"}, {"b"});
  f1.matched_lexicons.query = {"c"};
  const auto f2 = make_flag(2, "q2", "r1", {"b"});
  const auto f3 = make_flag(2, "q3", "r1", {"c"});  // neither report nor verdict
  const auto old = make_flag(1, "q9", "r9", {"c"});
  const std::vector<FlaggedInstance> flags = {f1, f2, f3};
  const std::vector<ValidationReport> reports = {make_report(f1.flag_id, 0.7), make_report(f2.flag_id, 0.2)};
  VerdictRecord v1;
  v1.verdict_id = "v1";
  v1.flag_id = f2.flag_id;
  v1.verdict = FlagStatus::HumanFp;
  VerdictRecord v2 = v1;
  v2.verdict_id = "v2";
  v2.flag_id = old.flag_id;
  v2.verdict = FlagStatus::HumanFp;
  VerdictRecord v3 = v2;
  v3.verdict_id = "v3";
  v3.verdict = FlagStatus::HumanTp;
  v3.supersedes = "v2";
  const std::vector<VerdictRecord> verdicts = {v1, v2, v3};
  const auto b = assemble_feedback_batch(2, 0.9, flags, reports, verdicts, {{old.flag_id, old}});
  ASSERT_EQ(b.batch_size(), 3u);
  EXPECT_EQ(b.entries[0].lexicons, (std::vector<std::string>{"a", "b"}));
  EXPECT_DOUBLE_EQ(b.entries[0].v, 0.7);
  EXPECT_DOUBLE_EQ(b.entries[1].v, 1.0);
  EXPECT_EQ(b.entries[1].source, ReportSource::Human);
  EXPECT_EQ(b.entries[2].flag_id, old.flag_id);
  EXPECT_DOUBLE_EQ(b.entries[2].v, 0.0);  // the superseding verdict wins
  EXPECT_FALSE(lexicon_mean_v(b, "d"));
  EXPECT_NEAR(*lexicon_mean_v(b, "b"), 0.85, 1e-12);
  EXPECT_THROW(assemble_feedback_batch(2, 0.9, flags, reports, verdicts, {}), NotFoundError);
}

class VerdictIngest : public ::testing::Test {
 protected:
  void SetUp() override {
    store_.emplace(dir_.path());
    flag_ = make_flag(0, "q1", "r1", {"a"}, {}, FlagStatus::ValidatedFp);
    const std::vector<FlaggedInstance> flags = {flag_};
    store_->commit_epoch(0, make_state(0.5, {{"a", "scandals"}}), flags, {}, {}, json{{"epoch", 0}});
  }
  TempDir dir_;
  std::optional<Store> store_;
  FlaggedInstance flag_;
};

TEST_F(VerdictIngest, FirstVerdictIsRecordedAndRepeatIsIdempotent) {
  const auto a = ingest_human_verdict(*store_, flag_.flag_id, FlagStatus::HumanTp, "rev", "2026-01-05T12:00:00Z");
  EXPECT_FALSE(a.duplicate);
  EXPECT_EQ(a.flag.status, FlagStatus::HumanTp);
  EXPECT_EQ(a.record.recorded_after_epoch, 0);
  const auto b = ingest_human_verdict(*store_, flag_.flag_id, FlagStatus::HumanTp, "rev", "2026-01-05T12:00:00Z");
  EXPECT_TRUE(b.duplicate);
  EXPECT_EQ(b.record, a.record);
  EXPECT_EQ(store_->all_verdicts().size(), 1u);
}

TEST_F(VerdictIngest, SecondVerdictNeedsSupersedes) {
  const auto a = ingest_human_verdict(*store_, flag_.flag_id, FlagStatus::HumanTp, "rev", "2026-01-05T12:00:00Z");
  EXPECT_THROW(ingest_human_verdict(*store_, flag_.flag_id, FlagStatus::HumanFp, "rev2", "2026-01-05T13:00:00Z"),
               ConflictError);
  EXPECT_THROW(ingest_human_verdict(*store_, flag_.flag_id, FlagStatus::HumanFp, "rev2", "2026-01-05T13:00:00Z",
                                    std::string("v-unknown")),
               ConflictError);
  const auto c = ingest_human_verdict(*store_, flag_.flag_id, FlagStatus::HumanFp, "rev2", "2026-01-05T13:00:00Z",
                                      a.record.verdict_id);
  EXPECT_EQ(c.flag.status, FlagStatus::HumanFp);
  EXPECT_EQ(latest_verdicts(store_->all_verdicts()).at(flag_.flag_id).verdict_id, c.record.verdict_id);
}

TEST_F(VerdictIngest, RejectsBadInput) {
  EXPECT_THROW(ingest_human_verdict(*store_, "missing", FlagStatus::HumanTp, "rev", "2026-01-05T12:00:00Z"),
               NotFoundError);
  EXPECT_THROW(ingest_human_verdict(*store_, flag_.flag_id, FlagStatus::ValidatedTp, "rev", "2026-01-05T12:00:00Z"),
               ValidationError);
  EXPECT_THROW(ingest_human_verdict(*store_, flag_.flag_id, FlagStatus::HumanTp, "", "2026-01-05T12:00:00Z"),
               ValidationError);
  EXPECT_THROW(ingest_human_verdict(*store_, flag_.flag_id, FlagStatus::HumanTp, "rev", "noon"), ValidationError);
  EXPECT_THROW(ingest_human_verdict(*store_, flag_.flag_id, FlagStatus::HumanTp, "rev", "2026-01-05T12:00:00Z",
                                    std::string("v-x")),
               ConflictError);
}

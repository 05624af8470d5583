#include <gtest/gtest.h>

#include "modguard/error.hpp"
#include "modguard/store.hpp"
#include "support.hpp"

using namespace modguard;
using namespace modguard::testing;

namespace {

struct Committed {
  LexiconState state = make_state(0.5, {{"lx-a", "scandals", 2, 3}, {"lx-b", "adult themes", 1, 1}});
  std::vector<FlaggedInstance> flags;
  std::vector<ValidationReport> reports;
  std::vector<json> audit;
  json summary = {{"epoch", 0}};
};

Committed sample(std::int64_t epoch) {
  Committed c;
  c.state = c.state.with_epoch(epoch);
  c.flags = {make_flag(epoch, "q1", "r1", {"lx-a"}), make_flag(epoch, "q2", "r4", {}, {"lx-b"})};
  c.reports = {make_report(c.flags[0].flag_id, 0.9)};
  c.audit = {json{{"type", "stage"}, {"seq", 0}, {"stage", "ingest"}}};
  c.summary = {{"epoch", epoch}};
  return c;
}

void commit(Store& s, std::int64_t epoch) {
  const auto c = sample(epoch);
  s.commit_epoch(epoch, c.state, c.flags, c.reports, c.audit, c.summary);
}

VerdictRecord verdict(const std::string& id, const std::string& flag_id, std::int64_t after) {
  VerdictRecord v;
  v.verdict_id = id;
  v.flag_id = flag_id;
  v.verdict = FlagStatus::HumanTp;
  v.reviewer_id = "rev";
  v.timestamp = "2026-01-06T09:00:00Z";
  v.recorded_after_epoch = after;
  return v;
}

}  // namespace

TEST(Sha256, MatchesKnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  TempDir dir;
  write_text(dir / "f", "abc");
  EXPECT_EQ(sha256_file(dir / "f"), sha256_hex("abc"));
}

TEST(JsonlLog, IdenticalAppendIsANoOpAndDifferentOneConflicts) {
  TempDir dir;
  JsonlLog log(dir / "log.jsonl", "id");
  EXPECT_EQ(log.append({{"id", "a"}, {"x", 1}}), JsonlLog::AppendResult::Appended);
  EXPECT_EQ(log.append({{"id", "a"}, {"x", 1}}), JsonlLog::AppendResult::Duplicate);
  EXPECT_THROW(log.append({{"id", "a"}, {"x", 2}}), ConflictError);
  EXPECT_THROW(log.append({{"x", 2}}), ValidationError);
  EXPECT_EQ(log.size(), 1u);
  EXPECT_EQ(read_text(dir / "log.jsonl"), "{\"id\":\"a\",\"x\":1}\n");
  // Reopening keeps the duplicate detection.
  JsonlLog again(dir / "log.jsonl", "id");
  EXPECT_EQ(again.append({{"id", "a"}, {"x", 1}}), JsonlLog::AppendResult::Duplicate);
}

TEST(JsonlLog, ThousandAppendsReadBackInOrder) {
  TempDir dir;
  JsonlLog log(dir / "log.jsonl", "id", false);
  for (int i = 0; i < 1000; ++i) log.append({{"id", "k" + std::to_string(i)}, {"i", i}});
  log.sync();
  const auto all = JsonlLog(dir / "log.jsonl", "id").read_all();
  ASSERT_EQ(all.size(), 1000u);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(all[i]["i"], i);
}

TEST(JsonlLog, TornTailIsDroppedOnOpen) {
  TempDir dir;
  write_text(dir / "log.jsonl", "{\"id\":\"a\"}\n{\"id\":\"b\"}\n{\"id\":\"c\",\"x");
  JsonlLog log(dir / "log.jsonl", "id");
  EXPECT_EQ(log.size(), 2u);
  EXPECT_FALSE(log.contains("c"));
  EXPECT_EQ(read_text(dir / "log.jsonl"), "{\"id\":\"a\"}\n{\"id\":\"b\"}\n");
  log.append({{"id", "c"}});
  EXPECT_EQ(JsonlLog(dir / "log.jsonl", "id").read_all().size(), 3u);
}

TEST(Store, CommitRoundTripsEveryFile) {
  TempDir dir;
  Store store(dir.path());
  EXPECT_FALSE(store.latest_epoch());
  const auto c = sample(0);
  const auto snap = store.commit_epoch(0, c.state, c.flags, c.reports, c.audit, c.summary);
  EXPECT_EQ(store.latest_epoch(), 0);
  EXPECT_EQ(snap.dir, store.epoch_dir(0));
  EXPECT_EQ(snap.dir.filename(), "epoch-0");
  for (auto name : kSealedFiles) {
    ASSERT_TRUE(snap.checksums.count(std::string(name))) << name;
    EXPECT_EQ(snap.checksums.at(std::string(name)), sha256_file(snap.dir / name));
  }
  EXPECT_TRUE(std::filesystem::exists(snap.dir / "manifest.json"));
  const auto data = store.load_epoch(0);
  EXPECT_EQ(data.state, c.state);
  EXPECT_EQ(data.flags, c.flags);
  EXPECT_EQ(data.reports, c.reports);
  EXPECT_EQ(store.load_summary(0), c.summary);
  // No staging leftovers next to the published epoch.
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++entries;
  EXPECT_EQ(entries, 1u);
}

TEST(Store, EpochsMustBeGapless) {
  TempDir dir;
  Store store(dir.path());
  EXPECT_THROW(commit(store, 1), ValidationError);
  commit(store, 0);
  EXPECT_THROW(commit(store, 0), ValidationError);
  EXPECT_THROW(commit(store, 2), ValidationError);
  commit(store, 1);
  EXPECT_EQ(store.epochs(), (std::vector<std::int64_t>{0, 1}));
}

TEST(Store, MissingEpochIsNotFoundAndCorruptionIsDetected) {
  TempDir dir;
  Store store(dir.path());
  EXPECT_THROW(store.load_epoch(0), NotFoundError);
  commit(store, 0);
  EXPECT_THROW(store.load_epoch(7), NotFoundError);
  auto text = read_text(store.epoch_dir(0) / "flags.jsonl");
  text[text.size() / 2] = text[text.size() / 2] == 'x' ? 'y' : 'x';
  write_text(store.epoch_dir(0) / "flags.jsonl", text);
  EXPECT_THROW(store.load_epoch(0), IntegrityError);
  std::filesystem::remove(store.epoch_dir(0) / "manifest.json");
  EXPECT_THROW(store.load_epoch(0), IntegrityError);
}

TEST(Store, VerdictsAttachToTheLatestEpoch) {
  TempDir dir;
  Store store(dir.path());
  EXPECT_THROW(store.append_verdict(verdict("v1", "f", 0)), NotFoundError);
  commit(store, 0);
  const auto flag0 = sample(0).flags[0];
  EXPECT_EQ(store.append_verdict(verdict("v1", flag0.flag_id, 0)), JsonlLog::AppendResult::Appended);
  EXPECT_EQ(store.append_verdict(verdict("v1", flag0.flag_id, 0)), JsonlLog::AppendResult::Duplicate);
  EXPECT_THROW(store.append_verdict(verdict("v2", flag0.flag_id, 3)), ValidationError);
  commit(store, 1);
  store.append_verdict(verdict("v3", flag0.flag_id, 1));
  EXPECT_EQ(store.verdicts_after(0).size(), 1u);
  EXPECT_EQ(store.verdicts_after(1).size(), 1u);
  EXPECT_EQ(store.verdicts_after(1)[0].verdict_id, "v3");
  const auto all = store.all_verdicts();
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[0].verdict_id, "v1");
  EXPECT_EQ(latest_verdicts(all).at(flag0.flag_id).verdict_id, "v3");
  // Verdict files are outside the manifest, so the sealed epoch still verifies.
  EXPECT_NO_THROW(store.load_epoch(0));
}

TEST(Store, OnlyVerdictsMayBeAppendedAfterSealing) {
  TempDir dir;
  Store store(dir.path());
  commit(store, 0);
  const auto f = sample(0).flags[0];
  EXPECT_THROW(store.append(RecordKind::Flag, json(f)), ValidationError);
  EXPECT_THROW(store.append(RecordKind::Report, json(make_report(f.flag_id, 0.2))), ValidationError);
  EXPECT_THROW(store.append(RecordKind::Verdict, json{{"verdict_id", "x"}}), ValidationError);
  EXPECT_EQ(store.append(RecordKind::Verdict, json(verdict("v9", f.flag_id, 0))), JsonlLog::AppendResult::Appended);
}

TEST(CheckRecordSchema, AcceptsWellFormedAndRejectsMalformed) {
  const auto f = make_flag(0, "q", "r");
  EXPECT_EQ(check_record_schema(RecordKind::Flag, json(f)), f.flag_id);
  json bad = f;
  bad["status"] = "MAYBE";
  EXPECT_THROW(check_record_schema(RecordKind::Flag, bad), ValidationError);
  auto r = make_report("f1", 0.4);
  EXPECT_EQ(check_record_schema(RecordKind::Report, json(r)), "f1");
  r.aggregate_v = 0.9;  // inconsistent with its task scores
  EXPECT_THROW(check_record_schema(RecordKind::Report, json(r)), ValidationError);
  json hv = verdict("v", "f", 0);
  hv["verdict"] = "VALIDATED_TP";
  EXPECT_THROW(check_record_schema(RecordKind::Verdict, hv), ValidationError);
}

TEST(Store, LocatesFlagsAcrossEpochs) {
  TempDir dir;
  Store store(dir.path());
  commit(store, 0);
  commit(store, 1);
  const auto f = sample(1).flags[1];
  const auto loc = store.locate_flag(f.flag_id);
  ASSERT_TRUE(loc);
  EXPECT_EQ(loc->epoch, 1);
  EXPECT_EQ(loc->seq, 1u);
  EXPECT_EQ(store.load_flag(f.flag_id), f);
  EXPECT_FALSE(store.locate_flag("nope"));
  EXPECT_THROW(store.load_flag("nope"), NotFoundError);
}

TEST(EffectiveStatus, HumanVerdictWins) {
  const auto f = make_flag(0, "q", "r", {}, {}, FlagStatus::ValidatedFp);
  std::unordered_map<std::string, VerdictRecord> latest;
  EXPECT_EQ(effective_status(f, latest), FlagStatus::ValidatedFp);
  latest[f.flag_id] = verdict("v", f.flag_id, 0);
  EXPECT_EQ(effective_status(f, latest), FlagStatus::HumanTp);
}

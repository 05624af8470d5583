#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>

#include "modguard/store.hpp"
#include "support.hpp"

using namespace modguard;
using namespace modguard::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(MODGUARD_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (p == nullptr) return r;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST(Cli, ExitCodesSeparateConfigFromOtherErrors) {
  TempDir dir;
  EXPECT_NE(cli("").code, 0);
  EXPECT_NE(cli("run --log x").code, 0);  // missing required options
  EXPECT_EQ(cli("run --log x --config " + q(dir / "missing.json") + " --data-dir " + q(dir / "d")).code, 2);
  EXPECT_EQ(cli("report --data-dir " + q(dir / "empty")).code, 1);
}

TEST(Cli, SimulateIsDeterministic) {
  const auto a = cli("simulate --weeks 2 --seed 3");
  const auto b = cli("simulate --weeks 2 --seed 3");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out.rfind("week,anomalies,tp,fp,precision,f1\n", 0), 0u);
  EXPECT_EQ(std::count(a.out.begin(), a.out.end(), '\n'), 3);
  EXPECT_NE(cli("simulate --weeks 2 --seed 4").out, a.out);
  const auto j = json::parse(cli("simulate --weeks 1 --format json").out);
  EXPECT_EQ(j["weeks"].size(), 1u);
}

TEST(Cli, ReportOverTheWeeklyCountsFixture) {
  TempDir dir;
  ASSERT_EQ(cli("gen-fixtures --weekly-counts --out " + q(dir.path())).code, 0);
  const auto r = cli("report --format json --data-dir " + q(dir / "data"));
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["trend"]["cumulative_tp"], 1814);
  EXPECT_EQ(j["weeks"].size(), 8u);
  EXPECT_EQ(cli("gen-fixtures --weekly-counts --out " + q(dir.path())).code, 2);  // store already populated
}

TEST(Cli, RunAndReplayOverGeneratedFixtures) {
  TempDir dir;
  ASSERT_EQ(cli("gen-fixtures --days 2 --out " + q(dir.path())).code, 0);
  const std::string common = " --config " + q(dir / "config.json") + " --data-dir " + q(dir / "data");
  for (int d = 0; d < 2; ++d) {
    const auto r = cli("run --log " + q(dir / ("day-00" + std::to_string(d) + ".jsonl")) + common);
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(json::parse(r.out)["epoch"], d);
  }
  const auto replay =
      cli("replay --epoch 1 --log " + q(dir / "day-001.jsonl") + common + " --out " + q(dir / "replayed"));
  ASSERT_EQ(replay.code, 0);
  Store store(dir / "data");
  EXPECT_EQ(json::parse(replay.out)["checksums"], json(store.snapshot(1).checksums));

  // Flags on planted violations validate as true positives, everything else as false positives.
  std::map<std::pair<std::string, std::string>, bool> truth;
  std::istringstream labels(read_text(dir / "labels.jsonl"));
  for (std::string line; std::getline(labels, line);) {
    const auto l = json::parse(line);
    truth[{l["query_id"], l["result_id"]}] = l["violation"];
  }
  std::size_t tp = 0;
  const auto flags = store.load_epoch(0).flags;
  ASSERT_FALSE(flags.empty());
  for (const auto& f : flags) {
    const bool violation = truth.at({f.query_id, f.result_id});
    EXPECT_EQ(f.status, violation ? FlagStatus::ValidatedTp : FlagStatus::ValidatedFp) << f.flag_id;
    tp += violation;
  }
  EXPECT_GT(tp, 0u);
}

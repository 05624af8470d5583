// Operator CLI: batch epoch runs, replay, simulation, reporting, fixtures.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "modguard/error.hpp"
#include "modguard/metrics.hpp"
#include "modguard/pipeline.hpp"
#include "modguard/simulation.hpp"
#include "modguard/store.hpp"

namespace fs = std::filesystem;
using namespace modguard;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitConfig = 2;

std::string render(std::span<const WeeklyMetrics> weeks, const std::string& format) {
  return format == "json" ? to_json_report(weeks).dump(2) + "\n" : to_csv(weeks);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"modguard: contextual content moderation for TV search"};
  app.require_subcommand(1);

  std::string log_path;
  std::string config_path;
  std::string data_dir;
  std::string out_dir;
  std::string format = "csv";
  int weeks = 8;
  int days = 7;
  int epochs_per_week = 7;
  std::int64_t epoch = 0;
  std::uint64_t seed = 7;
  bool weekly_counts = false;
  bool no_review = false;

  auto* run = app.add_subcommand("run", "Run the next epoch over one day of logs and commit its snapshot");
  run->add_option("--log", log_path, "Query log (JSON lines)")->required();
  run->add_option("--config", config_path, "Pipeline config (JSON)")->required();
  run->add_option("--data-dir", data_dir, "Store root")->required();

  auto* replay = app.add_subcommand("replay", "Recompute a committed epoch into a scratch directory");
  replay->add_option("--epoch", epoch, "Epoch to recompute")->required();
  replay->add_option("--log", log_path, "Query log the epoch was run on")->required();
  replay->add_option("--config", config_path, "Pipeline config (JSON)")->required();
  replay->add_option("--data-dir", data_dir, "Store root")->required();
  replay->add_option("--out", out_dir, "Output directory for the recomputed epoch")->required();

  auto* simulate_cmd = app.add_subcommand("simulate", "Run a seeded synthetic evaluation and print weekly metrics");
  simulate_cmd->add_option("--weeks", weeks, "Weeks to simulate (7 epochs each)")->check(CLI::NonNegativeNumber);
  simulate_cmd->add_option("--seed", seed, "Generator seed");
  simulate_cmd->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  simulate_cmd->add_option("--data-dir", data_dir, "Also persist every epoch into this (empty) store");
  simulate_cmd->add_flag("--no-review", no_review, "Disable the simulated reviewer");

  auto* report = app.add_subcommand("report", "Weekly precision and relative F1 for a store");
  report->add_option("--data-dir", data_dir, "Store root")->required();
  report->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  report->add_option("--epochs-per-week", epochs_per_week, "Epochs per metrics week")->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("gen-fixtures", "Write seeded synthetic logs, lexicons, config and labels");
  gen->add_option("--out", out_dir, "Output directory")->required();
  gen->add_option("--seed", seed, "Generator seed");
  gen->add_option("--days", days, "Days of logs to write")->check(CLI::NonNegativeNumber);
  gen->add_flag("--weekly-counts", weekly_counts,
                "Instead write a store under <out>/data whose flags reproduce the reference weekly counts");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const PipelineConfig cfg = load_config(config_path);
      Store store(data_dir);
      const EpochSummary s = run_epoch(log_path, cfg, store);
      std::cout << to_json(s).dump(2) << '\n';
    } else if (*replay) {
      const PipelineConfig cfg = load_config(config_path);
      const Store store(data_dir);
      const EpochSnapshot snap = replay_epoch(epoch, log_path, cfg, store, out_dir);
      std::cout << json{{"epoch", snap.epoch}, {"dir", snap.dir.string()}, {"checksums", snap.checksums}}.dump(2)
                << '\n';
    } else if (*simulate_cmd) {
      SimulationOptions opts;
      opts.weeks = weeks;
      opts.generator.seed = seed;
      opts.human_review = !no_review;
      if (!data_dir.empty()) opts.data_dir = data_dir;
      std::cout << render(simulate(opts).weekly, format);
    } else if (*report) {
      const Store store(data_dir);
      if (!store.latest_epoch()) throw ValidationError("store at " + data_dir + " holds no epochs");
      const auto weekly = store_weekly_metrics(store, epochs_per_week);
      std::cout << render(weekly, format);
    } else if (*gen) {
      if (weekly_counts) {
        Store store(fs::path(out_dir) / "data");
        write_weekly_counts_fixture(store);
      } else {
        GeneratorConfig g;
        g.seed = seed;
        write_fixtures(out_dir, g, days);
      }
      std::cout << "wrote fixtures to " << out_dir << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitOk;
}

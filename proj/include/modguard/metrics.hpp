#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "modguard/model.hpp"
#include "modguard/store.hpp"

namespace modguard {

struct WeeklyMetrics {
  int week = 1;
  std::size_t anomalies = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  double precision = 0.0;
  // Relative F1: recall is unobservable without ground-truth negatives, so
  // recall = 1 and F1 = 2p / (p + 1).
  double f1 = 0.0;

  bool operator==(const WeeklyMetrics&) const = default;
};

void to_json(json& j, const WeeklyMetrics& m);
void from_json(const json& j, WeeklyMetrics& m);

// Derived columns from counts. anomalies defaults to tp + fp.
WeeklyMetrics metrics_from_counts(int week, std::size_t tp, std::size_t fp, std::size_t anomalies);
WeeklyMetrics metrics_from_counts(int week, std::size_t tp, std::size_t fp);

// Counts flags whose epoch falls in the week's window [(week-1)·N, week·N).
// Human verdicts (from `latest`) take precedence over the stored status;
// unresolved flags count as anomalies but neither TP nor FP.
WeeklyMetrics summarize(std::span<const FlaggedInstance> flags, int week, int epochs_per_week,
                        const std::unordered_map<std::string, VerdictRecord>& latest = {});

// Every week from 1 to the last week that has any flag epoch in it.
std::vector<WeeklyMetrics> summarize_weeks(std::span<const FlaggedInstance> flags, int epochs_per_week,
                                           const std::unordered_map<std::string, VerdictRecord>& latest,
                                           std::int64_t last_epoch);

struct TrendReport {
  std::size_t weeks = 0;
  std::size_t first_tp = 0;
  std::size_t last_tp = 0;
  std::size_t cumulative_tp = 0;
  std::size_t cumulative_anomalies = 0;
  double first_precision = 0.0;
  double last_precision = 0.0;
  double precision_delta = 0.0;  // full precision
};

void to_json(json& j, const TrendReport& t);

// Requires at least one week.
TrendReport trend(std::span<const WeeklyMetrics> metrics);

// Header "week,anomalies,tp,fp,precision,f1"; ratios printed with 6 decimals.
std::string to_csv(std::span<const WeeklyMetrics> metrics);
json to_json_report(std::span<const WeeklyMetrics> metrics);

// Fixed-point rounding used when displaying ratios.
double round_to(double value, int decimals);

}  // namespace modguard

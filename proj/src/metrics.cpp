#include "modguard/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "modguard/error.hpp"

namespace modguard {

void to_json(json& j, const WeeklyMetrics& m) {
  j = json{{"week", m.week}, {"anomalies", m.anomalies}, {"tp", m.tp},
           {"fp", m.fp},     {"precision", m.precision}, {"f1", m.f1}};
}

void from_json(const json& j, WeeklyMetrics& m) {
  m.week = j.at("week").get<int>();
  m.anomalies = j.at("anomalies").get<std::size_t>();
  m.tp = j.at("tp").get<std::size_t>();
  m.fp = j.at("fp").get<std::size_t>();
  m.precision = j.at("precision").get<double>();
  m.f1 = j.at("f1").get<double>();
}

WeeklyMetrics metrics_from_counts(int week, std::size_t tp, std::size_t fp, std::size_t anomalies) {
  WeeklyMetrics m;
  m.week = week;
  m.anomalies = anomalies;
  m.tp = tp;
  m.fp = fp;
  if (tp + fp > 0) {
    m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    m.f1 = 2.0 * m.precision / (m.precision + 1.0);
  }
  return m;
}

WeeklyMetrics metrics_from_counts(int week, std::size_t tp, std::size_t fp) {
  return metrics_from_counts(week, tp, fp, tp + fp);
}

WeeklyMetrics summarize(std::span<const FlaggedInstance> flags, int week, int epochs_per_week,
                        const std::unordered_map<std::string, VerdictRecord>& latest) {
  if (week < 1) throw ConfigError("week index starts at 1");
  if (epochs_per_week < 1) throw ConfigError("epochs_per_week must be positive");
  const std::int64_t lo = static_cast<std::int64_t>(week - 1) * epochs_per_week;
  const std::int64_t hi = lo + epochs_per_week;
  std::size_t anomalies = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (const auto& f : flags) {
    if (f.epoch < lo || f.epoch >= hi) continue;
    ++anomalies;
    const FlagStatus s = effective_status(f, latest);
    if (!is_resolved(s)) continue;
    if (is_true_positive(s)) {
      ++tp;
    } else {
      ++fp;
    }
  }
  return metrics_from_counts(week, tp, fp, anomalies);
}

std::vector<WeeklyMetrics> summarize_weeks(std::span<const FlaggedInstance> flags, int epochs_per_week,
                                           const std::unordered_map<std::string, VerdictRecord>& latest,
                                           std::int64_t last_epoch) {
  std::vector<WeeklyMetrics> out;
  if (last_epoch < 0) return out;
  const int weeks = static_cast<int>(last_epoch / epochs_per_week) + 1;
  for (int w = 1; w <= weeks; ++w) out.push_back(summarize(flags, w, epochs_per_week, latest));
  return out;
}

void to_json(json& j, const TrendReport& t) {
  j = json{{"weeks", t.weeks},
           {"first_tp", t.first_tp},
           {"last_tp", t.last_tp},
           {"cumulative_tp", t.cumulative_tp},
           {"cumulative_anomalies", t.cumulative_anomalies},
           {"first_precision", t.first_precision},
           {"last_precision", t.last_precision},
           {"precision_delta", t.precision_delta}};
}

TrendReport trend(std::span<const WeeklyMetrics> metrics) {
  if (metrics.empty()) throw ValidationError("trend needs at least one week");
  TrendReport t;
  t.weeks = metrics.size();
  t.first_tp = metrics.front().tp;
  t.last_tp = metrics.back().tp;
  for (const auto& m : metrics) {
    t.cumulative_tp += m.tp;
    t.cumulative_anomalies += m.anomalies;
  }
  t.first_precision = metrics.front().precision;
  t.last_precision = metrics.back().precision;
  t.precision_delta = t.last_precision - t.first_precision;
  return t;
}

std::string to_csv(std::span<const WeeklyMetrics> metrics) {
  std::string out = "week,anomalies,tp,fp,precision,f1\n";
  char buf[160];
  for (const auto& m : metrics) {
    std::snprintf(buf, sizeof buf, "%d,%zu,%zu,%zu,%.6f,%.6f\n", m.week, m.anomalies, m.tp, m.fp, m.precision, m.f1);
    out += buf;
  }
  return out;
}

json to_json_report(std::span<const WeeklyMetrics> metrics) {
  json weeks = json::array();
  for (const auto& m : metrics) weeks.push_back(m);
  json out{{"weeks", std::move(weeks)}, {"f1_convention", "relative F1 (recall = 1)"}};
  if (!metrics.empty()) out["trend"] = trend(metrics);
  return out;
}

double round_to(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(value * scale) / scale;
}

}  // namespace modguard

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace modguard {

using json = nlohmann::json;

struct MetadataRecord {
  std::optional<std::string> age_rating;
  std::optional<std::vector<std::string>> genre;
  std::optional<std::string> description;

  bool operator==(const MetadataRecord&) const = default;
};

struct ResultRecord {
  std::string result_id;
  std::string title;
  int rank = 1;
  MetadataRecord metadata;

  bool operator==(const ResultRecord&) const = default;
};

struct QueryRecord {
  std::string query_id;
  std::string text;
  std::string timestamp;  // RFC 3339, UTC
  std::vector<ResultRecord> results;

  bool operator==(const QueryRecord&) const = default;
};

enum class Surface { Query, Result, Metadata };

enum class FlagStatus { Pending, ValidatedTp, ValidatedFp, HumanTp, HumanFp };

enum class ReportSource { Mock, Llm, Human };

std::string_view to_string(Surface s);
std::string_view to_string(FlagStatus s);
std::string_view to_string(ReportSource s);
FlagStatus parse_flag_status(std::string_view s);
ReportSource parse_report_source(std::string_view s);

bool is_human(FlagStatus s);
bool is_resolved(FlagStatus s);
// True when the flag counts as a confirmed violation (VALIDATED_TP or HUMAN_TP).
bool is_true_positive(FlagStatus s);
// Lifecycle is PENDING -> VALIDATED_* -> HUMAN_*; PENDING may jump straight to
// HUMAN_*, and a human verdict may only be replaced by another human verdict.
bool can_transition(FlagStatus from, FlagStatus to);

struct FlagScores {
  double similarity = 0.0;
  double g_query = 0.0;
  double g_result = 0.0;
  double g_metadata = 0.0;

  bool operator==(const FlagScores&) const = default;
};

struct MatchedLexicons {
  std::vector<std::string> query;
  std::vector<std::string> result;
  std::vector<std::string> metadata;

  // Result and metadata matches, deduplicated, first-seen order. These are the
  // lexicons a flag is attributed to during feedback.
  std::vector<std::string> attributable() const;

  bool operator==(const MatchedLexicons&) const = default;
};

struct FlaggedInstance {
  std::string flag_id;
  std::string query_id;
  std::string result_id;
  std::int64_t epoch = 0;
  FlagScores scores;
  MatchedLexicons matched_lexicons;
  FlagStatus status = FlagStatus::Pending;

  // Context carried so reviewers and validators can work from the flag alone.
  std::string timestamp;
  std::string query_text;
  std::string result_title;
  int rank = 1;
  MetadataRecord metadata;
  std::optional<std::string> error;  // set when validation left it PENDING

  bool operator==(const FlaggedInstance&) const = default;

  QueryRecord query() const;
  ResultRecord result() const;
};

// Deterministic id so replays reproduce identical flag files.
std::string make_flag_id(std::int64_t epoch, std::string_view query_id, std::string_view result_id);

struct ValidationReport {
  std::string flag_id;
  std::map<std::string, double> task_scores;
  std::map<std::string, double> weights;
  double aggregate_v = 0.0;
  ReportSource source = ReportSource::Mock;
  std::optional<std::string> rationale;

  bool operator==(const ValidationReport&) const = default;
};

// Problems with a report's internal consistency; empty when it is sound.
std::vector<std::string> check_report(const ValidationReport& report);

// JSON mapping (schemas documented in docs/formats.md).
void to_json(json& j, const MetadataRecord& m);
void from_json(const json& j, MetadataRecord& m);
void to_json(json& j, const ResultRecord& r);
void from_json(const json& j, ResultRecord& r);
void to_json(json& j, const QueryRecord& q);
void from_json(const json& j, QueryRecord& q);
void to_json(json& j, const FlaggedInstance& f);
void from_json(const json& j, FlaggedInstance& f);
void to_json(json& j, const ValidationReport& r);
void from_json(const json& j, ValidationReport& r);

// --- ingestion --------------------------------------------------------------

struct LineError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct IngestResult {
  std::vector<QueryRecord> records;
  std::vector<LineError> errors;
};

// Parses one query per line, keeping the k lowest-ranked results of each.
// Malformed lines are reported and skipped; an unreadable file or a duplicate
// query_id throws.
IngestResult ingest_query_log(const std::filesystem::path& path, int k);
IngestResult ingest_query_lines(std::string_view content, int k);

// Keeps the k results with the smallest ranks, in rank order.
void truncate_top_k(QueryRecord& record, int k);

enum class ViolationCode { EmptyQueryId, EmptyQuery, BadTimestamp, EmptyResultId, NonPositiveRank, NonStrictRanks, DuplicateResultId };

std::string_view to_string(ViolationCode c);

struct Violation {
  ViolationCode code;
  std::string detail;
};

std::vector<Violation> validate_record(const QueryRecord& record);

bool is_rfc3339(std::string_view ts);

}  // namespace modguard

#include "modguard/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "modguard/error.hpp"
#include "modguard/hash.hpp"
#include "modguard/text.hpp"

namespace modguard {

std::string_view to_string(Surface s) {
  switch (s) {
    case Surface::Query: return "QUERY";
    case Surface::Result: return "RESULT";
    case Surface::Metadata: return "METADATA";
  }
  return "?";
}

std::string_view to_string(FlagStatus s) {
  switch (s) {
    case FlagStatus::Pending: return "PENDING";
    case FlagStatus::ValidatedTp: return "VALIDATED_TP";
    case FlagStatus::ValidatedFp: return "VALIDATED_FP";
    case FlagStatus::HumanTp: return "HUMAN_TP";
    case FlagStatus::HumanFp: return "HUMAN_FP";
  }
  return "?";
}

std::string_view to_string(ReportSource s) {
  switch (s) {
    case ReportSource::Mock: return "MOCK";
    case ReportSource::Llm: return "LLM";
    case ReportSource::Human: return "HUMAN";
  }
  return "?";
}

FlagStatus parse_flag_status(std::string_view s) {
  for (auto st : {FlagStatus::Pending, FlagStatus::ValidatedTp, FlagStatus::ValidatedFp, FlagStatus::HumanTp,
                  FlagStatus::HumanFp}) {
    if (to_string(st) == s) return st;
  }
  throw ValidationError("unknown flag status '" + std::string(s) + "'");
}

ReportSource parse_report_source(std::string_view s) {
  for (auto src : {ReportSource::Mock, ReportSource::Llm, ReportSource::Human}) {
    if (to_string(src) == s) return src;
  }
  throw ValidationError("unknown report source '" + std::string(s) + "'");
}

bool is_human(FlagStatus s) { return s == FlagStatus::HumanTp || s == FlagStatus::HumanFp; }

bool is_resolved(FlagStatus s) { return s != FlagStatus::Pending; }

bool is_true_positive(FlagStatus s) { return s == FlagStatus::ValidatedTp || s == FlagStatus::HumanTp; }

bool can_transition(FlagStatus from, FlagStatus to) {
  switch (from) {
    case FlagStatus::Pending: return to != FlagStatus::Pending;
    case FlagStatus::ValidatedTp:
    case FlagStatus::ValidatedFp: return is_human(to);
    case FlagStatus::HumanTp:
    case FlagStatus::HumanFp: return is_human(to);
  }
  return false;
}

std::vector<std::string> MatchedLexicons::attributable() const {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto* list : {&result, &metadata}) {
    for (const auto& id : *list) {
      if (seen.insert(id).second) out.push_back(id);
    }
  }
  return out;
}

QueryRecord FlaggedInstance::query() const {
  QueryRecord q;
  q.query_id = query_id;
  q.text = query_text;
  q.timestamp = timestamp;
  q.results.push_back(result());
  return q;
}

ResultRecord FlaggedInstance::result() const { return ResultRecord{result_id, result_title, rank, metadata}; }

std::string make_flag_id(std::int64_t epoch, std::string_view query_id, std::string_view result_id) {
  std::string key = std::to_string(epoch);
  key.push_back('\x1f');
  key.append(query_id);
  key.push_back('\x1f');
  key.append(result_id);
  return "f" + std::to_string(epoch) + "-" + hex64(mix64(fnv1a64(key)));
}

std::vector<std::string> check_report(const ValidationReport& report) {
  std::vector<std::string> problems;
  std::set<std::string> score_names;
  std::set<std::string> weight_names;
  for (const auto& [k, _] : report.task_scores) score_names.insert(k);
  for (const auto& [k, _] : report.weights) weight_names.insert(k);
  if (score_names != weight_names) problems.emplace_back("task names of scores and weights differ");

  double weight_sum = 0.0;
  for (const auto& [name, w] : report.weights) {
    if (!(w >= 0.0 && w <= 1.0)) problems.push_back("weight of " + name + " outside [0,1]");
    weight_sum += w;
  }
  if (std::abs(weight_sum - 1.0) > 1e-9) problems.emplace_back("weights do not sum to 1");

  double v = 0.0;
  for (const auto& [name, s] : report.task_scores) {
    if (!(s >= 0.0 && s <= 1.0)) problems.push_back("score of " + name + " outside [0,1]");
    auto it = report.weights.find(name);
    if (it != report.weights.end()) v += it->second * s;
  }
  if (std::abs(v - report.aggregate_v) > 1e-9) problems.emplace_back("aggregate_v is not the weighted sum");
  if (!(report.aggregate_v >= 0.0 && report.aggregate_v <= 1.0)) problems.emplace_back("aggregate_v outside [0,1]");
  return problems;
}

// --- JSON ---------------------------------------------------------------------

void to_json(json& j, const MetadataRecord& m) {
  j = json::object();
  if (m.age_rating) j["age_rating"] = *m.age_rating;
  if (m.genre) j["genre"] = *m.genre;
  if (m.description) j["description"] = *m.description;
}

void from_json(const json& j, MetadataRecord& m) {
  m = MetadataRecord{};
  if (j.is_null()) return;
  if (!j.is_object()) throw ValidationError("metadata must be an object");
  if (auto it = j.find("age_rating"); it != j.end() && !it->is_null()) m.age_rating = it->get<std::string>();
  if (auto it = j.find("genre"); it != j.end() && !it->is_null()) m.genre = it->get<std::vector<std::string>>();
  if (auto it = j.find("description"); it != j.end() && !it->is_null()) m.description = it->get<std::string>();
}

void to_json(json& j, const ResultRecord& r) {
  j = json{{"result_id", r.result_id}, {"title", r.title}, {"rank", r.rank}, {"metadata", r.metadata}};
}

void from_json(const json& j, ResultRecord& r) {
  r.result_id = j.at("result_id").get<std::string>();
  r.title = j.at("title").get<std::string>();
  r.rank = j.at("rank").get<int>();
  if (auto it = j.find("metadata"); it != j.end()) {
    r.metadata = it->get<MetadataRecord>();
  } else {
    r.metadata = MetadataRecord{};
  }
}

void to_json(json& j, const QueryRecord& q) {
  j = json{{"query_id", q.query_id}, {"text", q.text}, {"timestamp", q.timestamp}, {"results", q.results}};
}

void from_json(const json& j, QueryRecord& q) {
  q.query_id = j.at("query_id").get<std::string>();
  q.text = j.at("text").get<std::string>();
  q.timestamp = j.at("timestamp").get<std::string>();
  if (!is_rfc3339(q.timestamp)) throw ValidationError("timestamp is not RFC 3339: " + q.timestamp);
  q.results = j.at("results").get<std::vector<ResultRecord>>();
}

void to_json(json& j, const FlaggedInstance& f) {
  j = json{{"flag_id", f.flag_id},
           {"query_id", f.query_id},
           {"result_id", f.result_id},
           {"epoch", f.epoch},
           {"scores",
            {{"similarity", f.scores.similarity},
             {"g_query", f.scores.g_query},
             {"g_result", f.scores.g_result},
             {"g_metadata", f.scores.g_metadata}}},
           {"matched_lexicons",
            {{"query", f.matched_lexicons.query},
             {"result", f.matched_lexicons.result},
             {"metadata", f.matched_lexicons.metadata}}},
           {"status", to_string(f.status)},
           {"timestamp", f.timestamp},
           {"query_text", f.query_text},
           {"result_title", f.result_title},
           {"rank", f.rank},
           {"metadata", f.metadata}};
  if (f.error) j["error"] = *f.error;
}

void from_json(const json& j, FlaggedInstance& f) {
  f.flag_id = j.at("flag_id").get<std::string>();
  f.query_id = j.at("query_id").get<std::string>();
  f.result_id = j.at("result_id").get<std::string>();
  f.epoch = j.at("epoch").get<std::int64_t>();
  const auto& s = j.at("scores");
  f.scores = FlagScores{s.at("similarity").get<double>(), s.at("g_query").get<double>(),
                        s.at("g_result").get<double>(), s.at("g_metadata").get<double>()};
  const auto& m = j.at("matched_lexicons");
  f.matched_lexicons.query = m.at("query").get<std::vector<std::string>>();
  f.matched_lexicons.result = m.at("result").get<std::vector<std::string>>();
  f.matched_lexicons.metadata = m.at("metadata").get<std::vector<std::string>>();
  f.status = parse_flag_status(j.at("status").get<std::string>());
  f.timestamp = j.value("timestamp", std::string{});
  f.query_text = j.value("query_text", std::string{});
  f.result_title = j.value("result_title", std::string{});
  f.rank = j.value("rank", 1);
  f.metadata = j.contains("metadata") ? j.at("metadata").get<MetadataRecord>() : MetadataRecord{};
  f.error = j.contains("error") ? std::optional<std::string>(j.at("error").get<std::string>()) : std::nullopt;
  if (f.epoch < 0) throw ValidationError("flag epoch must be >= 0");
}

void to_json(json& j, const ValidationReport& r) {
  j = json{{"flag_id", r.flag_id},
           {"task_scores", r.task_scores},
           {"weights", r.weights},
           {"aggregate_v", r.aggregate_v},
           {"source", to_string(r.source)}};
  if (r.rationale) j["rationale"] = *r.rationale;
}

void from_json(const json& j, ValidationReport& r) {
  r.flag_id = j.at("flag_id").get<std::string>();
  r.task_scores = j.at("task_scores").get<std::map<std::string, double>>();
  r.weights = j.at("weights").get<std::map<std::string, double>>();
  r.aggregate_v = j.at("aggregate_v").get<double>();
  r.source = parse_report_source(j.at("source").get<std::string>());
  r.rationale = j.contains("rationale") ? std::optional<std::string>(j.at("rationale").get<std::string>())
                                        : std::nullopt;
}

// --- ingestion -----------------------------------------------------------------

void truncate_top_k(QueryRecord& record, int k) {
  if (k < 0) k = 0;
  const auto limit = static_cast<std::size_t>(k);
  if (record.results.size() <= limit) return;
  std::vector<std::size_t> order(record.results.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return record.results[a].rank < record.results[b].rank;
  });
  order.resize(limit);
  std::sort(order.begin(), order.end());
  std::vector<ResultRecord> kept;
  kept.reserve(limit);
  for (std::size_t i : order) kept.push_back(std::move(record.results[i]));
  record.results = std::move(kept);
}

IngestResult ingest_query_lines(std::string_view content, int k) {
  if (k <= 0) throw ConfigError("top-k must be positive");
  IngestResult out;
  std::unordered_set<std::string> seen_ids;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (text::is_blank(line)) continue;

    QueryRecord record;
    try {
      record = json::parse(line).get<QueryRecord>();
    } catch (const std::exception& e) {
      out.errors.push_back({line_no, e.what()});
      continue;
    }
    if (!seen_ids.insert(record.query_id).second) {
      throw ValidationError("duplicate query_id '" + record.query_id + "' at line " + std::to_string(line_no));
    }
    truncate_top_k(record, k);
    out.records.push_back(std::move(record));
  }
  return out;
}

IngestResult ingest_query_log(const std::filesystem::path& path, int k) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read query log " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("error reading query log " + path.string());
  return ingest_query_lines(buf.str(), k);
}

std::string_view to_string(ViolationCode c) {
  switch (c) {
    case ViolationCode::EmptyQueryId: return "empty_query_id";
    case ViolationCode::EmptyQuery: return "empty_query";
    case ViolationCode::BadTimestamp: return "bad_timestamp";
    case ViolationCode::EmptyResultId: return "empty_result_id";
    case ViolationCode::NonPositiveRank: return "non_positive_rank";
    case ViolationCode::NonStrictRanks: return "non_strict_ranks";
    case ViolationCode::DuplicateResultId: return "duplicate_result_id";
  }
  return "?";
}

std::vector<Violation> validate_record(const QueryRecord& record) {
  std::vector<Violation> out;
  if (record.query_id.empty()) out.push_back({ViolationCode::EmptyQueryId, "query_id is empty"});
  if (text::normalize(record.text).empty()) out.push_back({ViolationCode::EmptyQuery, "query text is empty"});
  if (!is_rfc3339(record.timestamp)) out.push_back({ViolationCode::BadTimestamp, record.timestamp});

  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < record.results.size(); ++i) {
    const auto& r = record.results[i];
    if (r.result_id.empty()) out.push_back({ViolationCode::EmptyResultId, "result at position " + std::to_string(i)});
    if (r.rank < 1) out.push_back({ViolationCode::NonPositiveRank, r.result_id + " has rank " + std::to_string(r.rank)});
    if (i > 0 && r.rank <= record.results[i - 1].rank) {
      out.push_back({ViolationCode::NonStrictRanks, "rank " + std::to_string(r.rank) + " follows " +
                                                        std::to_string(record.results[i - 1].rank)});
    }
    if (!r.result_id.empty() && !ids.insert(r.result_id).second) {
      out.push_back({ViolationCode::DuplicateResultId, r.result_id});
    }
  }
  return out;
}

bool is_rfc3339(std::string_view ts) {
  // YYYY-MM-DDTHH:MM:SS[.frac](Z|+HH:MM|-HH:MM)
  auto digits = [&](std::size_t at, std::size_t n) {
    if (at + n > ts.size()) return false;
    for (std::size_t i = at; i < at + n; ++i) {
      if (ts[i] < '0' || ts[i] > '9') return false;
    }
    return true;
  };
  if (!digits(0, 4) || ts.size() < 20 || ts[4] != '-' || !digits(5, 2) || ts[7] != '-' || !digits(8, 2)) return false;
  if (ts[10] != 'T' && ts[10] != 't' && ts[10] != ' ') return false;
  if (!digits(11, 2) || ts[13] != ':' || !digits(14, 2) || ts[16] != ':' || !digits(17, 2)) return false;
  auto num = [&](std::size_t at) { return (ts[at] - '0') * 10 + (ts[at + 1] - '0'); };
  const int month = num(5);
  const int day = num(8);
  // Leap seconds allowed.
  if (month < 1 || month > 12 || day < 1 || day > 31 || num(11) > 23 || num(14) > 59 || num(17) > 60) return false;
  std::size_t i = 19;
  if (i < ts.size() && ts[i] == '.') {
    ++i;
    std::size_t start = i;
    while (i < ts.size() && ts[i] >= '0' && ts[i] <= '9') ++i;
    if (i == start) return false;
  }
  if (i >= ts.size()) return false;
  if (ts[i] == 'Z' || ts[i] == 'z') return i + 1 == ts.size();
  if (ts[i] != '+' && ts[i] != '-') return false;
  return digits(i + 1, 2) && i + 3 < ts.size() && ts[i + 3] == ':' && digits(i + 4, 2) && i + 6 == ts.size() &&
         num(i + 1) <= 23 && num(i + 4) <= 59;
}

}  // namespace modguard

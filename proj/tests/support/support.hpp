#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "modguard/lexicon.hpp"
#include "modguard/model.hpp"

namespace modguard::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("modguard-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct LexSpec {
  std::string id;
  std::string term;
  std::uint64_t f0 = 1;
  std::uint64_t f_t = 0;
  std::optional<double> override_score;
  std::string category = "controversial";
};

inline LexiconState make_state(double alpha, const std::vector<LexSpec>& specs, std::int64_t epoch = 0) {
  std::vector<LexiconEntry> entries;
  for (const auto& s : specs) {
    LexiconEntry e;
    e.lexicon = Lexicon{s.id, s.term, s.category, 0};
    e.f0 = s.f0;
    e.f_t = s.f_t;
    e.override_score = s.override_score;
    entries.push_back(std::move(e));
  }
  return LexiconState(epoch, alpha, std::move(entries));
}

inline ResultRecord result(std::string id, std::string title, int rank, MetadataRecord m = {}) {
  ResultRecord r;
  r.result_id = std::move(id);
  r.title = std::move(title);
  r.rank = rank;
  r.metadata = std::move(m);
  return r;
}

inline QueryRecord query(std::string id, std::string text, std::vector<ResultRecord> results) {
  QueryRecord q;
  q.query_id = std::move(id);
  q.text = std::move(text);
  q.timestamp = "2026-01-05T10:00:00Z";
  q.results = std::move(results);
  return q;
}

inline MetadataRecord description(std::string d) {
  MetadataRecord m;
  m.description = std::move(d);
  return m;
}

inline FlaggedInstance make_flag(std::int64_t epoch, const std::string& qid, const std::string& rid,
                                 std::vector<std::string> result_lex = {}, std::vector<std::string> meta_lex = {},
                                 FlagStatus status = FlagStatus::Pending) {
  FlaggedInstance f;
  f.flag_id = make_flag_id(epoch, qid, rid);
  f.query_id = qid;
  f.result_id = rid;
  f.epoch = epoch;
  f.scores = FlagScores{0.5, 0.0, 0.8, 0.0};
  f.matched_lexicons = MatchedLexicons{{}, std::move(result_lex), std::move(meta_lex)};
  f.status = status;
  f.timestamp = "2026-01-05T10:00:00Z";
  f.query_text = "query " + qid;
  f.result_title = "title " + rid;
  f.rank = 1;
  return f;
}

// Single-task report with aggregate v.
inline ValidationReport make_report(const std::string& flag_id, double v) {
  ValidationReport r;
  r.flag_id = flag_id;
  r.task_scores = {{"policy_violation", v}};
  r.weights = {{"policy_violation", 1.0}};
  r.aggregate_v = v;
  return r;
}

}  // namespace modguard::testing

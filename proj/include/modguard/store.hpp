#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "modguard/lexicon.hpp"
#include "modguard/model.hpp"

namespace modguard {

// Editorial verdict on one flag. Verdicts are never rewritten; a correction is
// a new record naming the verdict it supersedes.
struct VerdictRecord {
  std::string verdict_id;
  std::string flag_id;
  FlagStatus verdict = FlagStatus::HumanFp;  // HUMAN_TP | HUMAN_FP
  std::string reviewer_id;
  std::string timestamp;
  std::optional<std::string> supersedes;
  // Latest sealed epoch when the verdict was recorded; the next epoch run
  // (recorded_after_epoch + 1) folds it into feedback.
  std::int64_t recorded_after_epoch = 0;

  bool operator==(const VerdictRecord&) const = default;
};

void to_json(json& j, const VerdictRecord& v);
void from_json(const json& j, VerdictRecord& v);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// Append-only JSON-lines file keyed on one string field. Appending a record
// whose key is already present is a no-op when the line is identical and a
// ConflictError otherwise. A torn final line (crash mid-write) is cut off
// when the file is opened.
class JsonlLog {
 public:
  enum class AppendResult { Appended, Duplicate };

  JsonlLog(std::filesystem::path path, std::string key_field, bool sync_each_append = true);

  AppendResult append(const json& record);
  void sync();

  const std::filesystem::path& path() const { return path_; }
  std::size_t size() const { return keys_.size(); }
  bool contains(const std::string& key) const { return keys_.count(key) != 0; }
  std::vector<json> read_all() const;

 private:
  std::filesystem::path path_;
  std::string key_field_;
  bool sync_each_append_;
  std::unordered_map<std::string, std::string> keys_;  // key -> serialized line
};

enum class RecordKind { Flag, Report, Verdict };

// Rejects a record that does not parse as its kind; returns the key field.
std::string check_record_schema(RecordKind kind, const json& record);

struct EpochSnapshot {
  std::int64_t epoch = 0;
  std::filesystem::path dir;
  std::map<std::string, std::string> checksums;  // file name -> sha256
};

struct EpochData {
  LexiconState state;
  std::vector<FlaggedInstance> flags;
  std::vector<ValidationReport> reports;
};

// Files covered by an epoch manifest, in write order.
inline constexpr std::array<std::string_view, 5> kSealedFiles = {"state.json", "flags.jsonl", "reports.jsonl",
                                                                 "audit.jsonl", "summary.json"};

// Writes a complete epoch directory (sealed files plus manifest.json) at `dir`.
// Used for commits and for replays into a scratch location.
EpochSnapshot write_epoch_dir(const std::filesystem::path& dir, std::int64_t epoch, const LexiconState& state,
                              std::span<const FlaggedInstance> flags, std::span<const ValidationReport> reports,
                              std::span<const json> audit, const json& summary);

// Reads and checksum-verifies an epoch directory.
EpochData read_epoch_dir(const std::filesystem::path& dir);

struct FlagLocation {
  std::int64_t epoch = 0;
  std::size_t seq = 0;  // line index within flags.jsonl
};

// data/epoch-<n>/{state.json, flags.jsonl, reports.jsonl, audit.jsonl,
// summary.json, manifest.json, verdicts.jsonl}. Sealed files never change after
// commit; verdicts.jsonl is the one append-only file.
class Store {
 public:
  explicit Store(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path epoch_dir(std::int64_t epoch) const;

  std::vector<std::int64_t> epochs() const;
  std::optional<std::int64_t> latest_epoch() const;
  bool has_epoch(std::int64_t epoch) const;

  // Atomically publishes epoch n; n must be latest + 1 (or 0 on an empty store).
  EpochSnapshot commit_epoch(std::int64_t epoch, const LexiconState& state, std::span<const FlaggedInstance> flags,
                             std::span<const ValidationReport> reports, std::span<const json> audit,
                             const json& summary);

  // Throws NotFoundError for a missing epoch, IntegrityError on checksum mismatch.
  EpochData load_epoch(std::int64_t epoch) const;
  EpochSnapshot snapshot(std::int64_t epoch) const;
  json load_summary(std::int64_t epoch) const;

  // Verdicts recorded after `epoch` was sealed, in append order.
  std::vector<VerdictRecord> verdicts_after(std::int64_t epoch) const;
  // All verdicts, oldest epoch first, append order within an epoch.
  std::vector<VerdictRecord> all_verdicts() const;
  // Appends to the latest epoch's verdicts.jsonl, durably.
  JsonlLog::AppendResult append_verdict(const VerdictRecord& v);

  // Schema-checked append into the latest epoch. Flags and reports are written
  // only as part of commit_epoch, so after sealing only verdicts are accepted.
  JsonlLog::AppendResult append(RecordKind kind, const json& record);

  std::optional<FlagLocation> locate_flag(const std::string& flag_id) const;
  FlaggedInstance load_flag(const std::string& flag_id) const;

 private:
  void rebuild_flag_index() const;

  std::filesystem::path root_;
  mutable std::optional<std::int64_t> indexed_through_;
  mutable std::unordered_map<std::string, FlagLocation> flag_index_;
};

// Latest verdict per flag id ("latest" = last in the given order).
std::unordered_map<std::string, VerdictRecord> latest_verdicts(std::span<const VerdictRecord> verdicts);

// Human verdict overrides the stored status.
FlagStatus effective_status(const FlaggedInstance& flag, const std::unordered_map<std::string, VerdictRecord>& latest);

}  // namespace modguard

#include "modguard/store.hpp"

#include <fcntl.h>
#include <openssl/evp.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "modguard/error.hpp"

namespace modguard {

namespace fs = std::filesystem;

// --- verdict records --------------------------------------------------------------

void to_json(json& j, const VerdictRecord& v) {
  j = json{{"verdict_id", v.verdict_id},
           {"flag_id", v.flag_id},
           {"verdict", to_string(v.verdict)},
           {"reviewer_id", v.reviewer_id},
           {"timestamp", v.timestamp},
           {"recorded_after_epoch", v.recorded_after_epoch}};
  if (v.supersedes) j["supersedes"] = *v.supersedes;
}

void from_json(const json& j, VerdictRecord& v) {
  v.verdict_id = j.at("verdict_id").get<std::string>();
  v.flag_id = j.at("flag_id").get<std::string>();
  v.verdict = parse_flag_status(j.at("verdict").get<std::string>());
  if (!is_human(v.verdict)) throw ValidationError("verdict must be HUMAN_TP or HUMAN_FP");
  v.reviewer_id = j.at("reviewer_id").get<std::string>();
  v.timestamp = j.at("timestamp").get<std::string>();
  v.recorded_after_epoch = j.value("recorded_after_epoch", std::int64_t{0});
  v.supersedes = j.contains("supersedes") && !j["supersedes"].is_null()
                     ? std::optional<std::string>(j["supersedes"].get<std::string>())
                     : std::nullopt;
}

// --- hashing ----------------------------------------------------------------------

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void fsync_path(const fs::path& path, bool directory) {
  const int fd = ::open(path.c_str(), directory ? O_RDONLY | O_DIRECTORY : O_RDONLY);
  if (fd < 0) throw IoError("cannot open " + path.string() + " for sync: " + std::strerror(errno));
  const int rc = ::fsync(fd);
  ::close(fd);
  if (rc != 0) throw IoError("fsync failed for " + path.string() + ": " + std::strerror(errno));
}

void write_all(int fd, std::string_view data, const fs::path& path) {
  while (!data.empty()) {
    const ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError("write failed for " + path.string() + ": " + std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

void write_file(const fs::path& path, std::string_view content) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw IoError("cannot create " + path.string() + ": " + std::strerror(errno));
  try {
    write_all(fd, content, path);
  } catch (...) {
    ::close(fd);
    throw;
  }
  const int rc = ::fsync(fd);
  ::close(fd);
  if (rc != 0) throw IoError("fsync failed for " + path.string());
}

std::vector<json> parse_jsonl(const fs::path& path) {
  std::vector<json> out;
  if (!fs::exists(path)) return out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(json::parse(line));
  }
  return out;
}

std::optional<std::int64_t> parse_epoch_dir_name(const std::string& name) {
  constexpr std::string_view prefix = "epoch-";
  if (name.size() <= prefix.size() || name.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
  std::int64_t value = 0;
  const char* first = name.data() + prefix.size();
  const char* last = name.data() + name.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || value < 0) return std::nullopt;
  return value;
}

}  // namespace

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

// --- JsonlLog ---------------------------------------------------------------------

JsonlLog::JsonlLog(fs::path path, std::string key_field, bool sync_each_append)
    : path_(std::move(path)), key_field_(std::move(key_field)), sync_each_append_(sync_each_append) {
  if (!fs::exists(path_)) return;
  std::string content = read_file(path_);
  // Drop a torn tail left by a crash between write() and the newline landing.
  const auto last_newline = content.rfind('\n');
  const std::size_t intact = last_newline == std::string::npos ? 0 : last_newline + 1;
  if (intact != content.size()) {
    fs::resize_file(path_, intact);
    content.resize(intact);
  }
  std::size_t pos = 0;
  while (pos < content.size()) {
    const auto end = content.find('\n', pos);
    std::string line = content.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    const json j = json::parse(line);
    keys_.emplace(j.at(key_field_).get<std::string>(), std::move(line));
  }
}

JsonlLog::AppendResult JsonlLog::append(const json& record) {
  if (!record.contains(key_field_) || !record[key_field_].is_string()) {
    throw ValidationError("record lacks string key field '" + key_field_ + "'");
  }
  const std::string key = record[key_field_].get<std::string>();
  std::string line = record.dump();
  if (auto it = keys_.find(key); it != keys_.end()) {
    if (it->second == line) return AppendResult::Duplicate;
    throw ConflictError("a different record with " + key_field_ + " '" + key + "' already exists");
  }
  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw IoError("cannot open " + path_.string() + ": " + std::strerror(errno));
  std::string payload = line + '\n';
  try {
    write_all(fd, payload, path_);
  } catch (...) {
    ::close(fd);
    throw;
  }
  const int rc = sync_each_append_ ? ::fsync(fd) : 0;
  ::close(fd);
  if (rc != 0) throw IoError("fsync failed for " + path_.string());
  keys_.emplace(key, std::move(line));
  return AppendResult::Appended;
}

void JsonlLog::sync() {
  if (fs::exists(path_)) fsync_path(path_, false);
}

std::vector<json> JsonlLog::read_all() const { return parse_jsonl(path_); }

std::string check_record_schema(RecordKind kind, const json& record) {
  try {
    switch (kind) {
      case RecordKind::Flag: return record.get<FlaggedInstance>().flag_id;
      case RecordKind::Report: {
        auto r = record.get<ValidationReport>();
        auto problems = check_report(r);
        if (!problems.empty()) throw ValidationError(problems.front());
        return r.flag_id;
      }
      case RecordKind::Verdict: return record.get<VerdictRecord>().verdict_id;
    }
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("schema violation: ") + e.what());
  } catch (const std::exception& e) {
    throw ValidationError(std::string("schema violation: ") + e.what());
  }
  throw ValidationError("unknown record kind");
}

// --- epoch directories ------------------------------------------------------------

EpochSnapshot write_epoch_dir(const fs::path& dir, std::int64_t epoch, const LexiconState& state,
                              std::span<const FlaggedInstance> flags, std::span<const ValidationReport> reports,
                              std::span<const json> audit, const json& summary) {
  fs::create_directories(dir);
  for (std::string_view name : kSealedFiles) fs::remove(dir / name);

  write_file(dir / "state.json", state_to_json(state).dump(2) + "\n");
  {
    JsonlLog log(dir / "flags.jsonl", "flag_id", false);
    for (const auto& f : flags) log.append(json(f));
    if (flags.empty()) write_file(dir / "flags.jsonl", "");
    log.sync();
  }
  {
    JsonlLog log(dir / "reports.jsonl", "flag_id", false);
    for (const auto& r : reports) log.append(json(r));
    if (reports.empty()) write_file(dir / "reports.jsonl", "");
    log.sync();
  }
  {
    std::string content;
    for (const auto& a : audit) content += a.dump() + "\n";
    write_file(dir / "audit.jsonl", content);
  }
  write_file(dir / "summary.json", summary.dump(2) + "\n");

  EpochSnapshot snap;
  snap.epoch = epoch;
  snap.dir = dir;
  json files = json::object();
  for (std::string_view name : kSealedFiles) {
    const std::string sum = sha256_file(dir / name);
    snap.checksums.emplace(std::string(name), sum);
    files[std::string(name)] = sum;
  }
  write_file(dir / "manifest.json", json{{"epoch", epoch}, {"sha256", files}}.dump(2) + "\n");
  fsync_path(dir, true);
  return snap;
}

namespace {

EpochSnapshot verify_dir(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw IntegrityError("missing manifest.json in " + dir.string());
  json manifest;
  try {
    manifest = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    throw IntegrityError("unreadable manifest in " + dir.string() + ": " + e.what());
  }
  EpochSnapshot snap;
  snap.epoch = manifest.at("epoch").get<std::int64_t>();
  snap.dir = dir;
  for (std::string_view name : kSealedFiles) {
    const fs::path file = dir / name;
    const std::string expected = manifest.at("sha256").at(std::string(name)).get<std::string>();
    if (!fs::exists(file)) throw IntegrityError("missing " + file.string());
    if (sha256_file(file) != expected) throw IntegrityError("checksum mismatch for " + file.string());
    snap.checksums.emplace(std::string(name), expected);
  }
  return snap;
}

}  // namespace

EpochData read_epoch_dir(const fs::path& dir) {
  verify_dir(dir);
  EpochData data;
  try {
    data.state = state_from_json(json::parse(read_file(dir / "state.json")));
    for (const auto& j : parse_jsonl(dir / "flags.jsonl")) data.flags.push_back(j.get<FlaggedInstance>());
    for (const auto& j : parse_jsonl(dir / "reports.jsonl")) data.reports.push_back(j.get<ValidationReport>());
  } catch (const json::exception& e) {
    throw IntegrityError("malformed epoch file in " + dir.string() + ": " + e.what());
  }
  return data;
}

// --- Store ------------------------------------------------------------------------

Store::Store(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
  // Staging directories belong to epochs that never committed.
  for (const auto& entry : fs::directory_iterator(root_)) {
    const auto name = entry.path().filename().string();
    if (entry.is_directory() && name.rfind(".staging-", 0) == 0) fs::remove_all(entry.path());
  }
}

fs::path Store::epoch_dir(std::int64_t epoch) const { return root_ / ("epoch-" + std::to_string(epoch)); }

std::vector<std::int64_t> Store::epochs() const {
  std::vector<std::int64_t> out;
  for (const auto& entry : fs::directory_iterator(root_)) {
    if (!entry.is_directory()) continue;
    if (auto e = parse_epoch_dir_name(entry.path().filename().string())) out.push_back(*e);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<std::int64_t> Store::latest_epoch() const {
  auto all = epochs();
  if (all.empty()) return std::nullopt;
  return all.back();
}

bool Store::has_epoch(std::int64_t epoch) const { return fs::exists(epoch_dir(epoch) / "manifest.json"); }

EpochSnapshot Store::commit_epoch(std::int64_t epoch, const LexiconState& state,
                                  std::span<const FlaggedInstance> flags, std::span<const ValidationReport> reports,
                                  std::span<const json> audit, const json& summary) {
  const auto latest = latest_epoch();
  const std::int64_t expected = latest ? *latest + 1 : 0;
  if (epoch != expected) {
    throw ValidationError("epoch " + std::to_string(epoch) + " breaks the gapless sequence (expected " +
                          std::to_string(expected) + ")");
  }
  const fs::path staging = root_ / (".staging-" + std::to_string(epoch));
  fs::remove_all(staging);
  write_epoch_dir(staging, epoch, state, flags, reports, audit, summary);
  fs::rename(staging, epoch_dir(epoch));
  fsync_path(root_, true);
  return snapshot(epoch);
}

EpochData Store::load_epoch(std::int64_t epoch) const {
  if (!fs::exists(epoch_dir(epoch))) throw NotFoundError("epoch " + std::to_string(epoch) + " not found");
  return read_epoch_dir(epoch_dir(epoch));
}

EpochSnapshot Store::snapshot(std::int64_t epoch) const {
  if (!fs::exists(epoch_dir(epoch))) throw NotFoundError("epoch " + std::to_string(epoch) + " not found");
  return verify_dir(epoch_dir(epoch));
}

json Store::load_summary(std::int64_t epoch) const {
  snapshot(epoch);
  return json::parse(read_file(epoch_dir(epoch) / "summary.json"));
}

std::vector<VerdictRecord> Store::verdicts_after(std::int64_t epoch) const {
  std::vector<VerdictRecord> out;
  for (const auto& j : parse_jsonl(epoch_dir(epoch) / "verdicts.jsonl")) out.push_back(j.get<VerdictRecord>());
  return out;
}

std::vector<VerdictRecord> Store::all_verdicts() const {
  std::vector<VerdictRecord> out;
  for (auto e : epochs()) {
    auto v = verdicts_after(e);
    out.insert(out.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  }
  return out;
}

JsonlLog::AppendResult Store::append_verdict(const VerdictRecord& v) {
  const auto latest = latest_epoch();
  if (!latest) throw NotFoundError("no sealed epoch to attach a verdict to");
  if (v.recorded_after_epoch != *latest) {
    throw ValidationError("verdict must be recorded after the latest epoch (" + std::to_string(*latest) + ")");
  }
  JsonlLog log(epoch_dir(*latest) / "verdicts.jsonl", "verdict_id", true);
  return log.append(json(v));
}

JsonlLog::AppendResult Store::append(RecordKind kind, const json& record) {
  check_record_schema(kind, record);
  if (kind != RecordKind::Verdict) {
    throw ValidationError("flags and reports are sealed with their epoch; only verdicts can be appended");
  }
  return append_verdict(record.get<VerdictRecord>());
}

void Store::rebuild_flag_index() const {
  const auto latest = latest_epoch();
  if (indexed_through_ == latest) return;
  flag_index_.clear();
  for (auto e : epochs()) {
    std::size_t seq = 0;
    for (const auto& j : parse_jsonl(epoch_dir(e) / "flags.jsonl")) {
      flag_index_[j.at("flag_id").get<std::string>()] = FlagLocation{e, seq++};
    }
  }
  indexed_through_ = latest;
}

std::optional<FlagLocation> Store::locate_flag(const std::string& flag_id) const {
  rebuild_flag_index();
  auto it = flag_index_.find(flag_id);
  if (it == flag_index_.end()) return std::nullopt;
  return it->second;
}

FlaggedInstance Store::load_flag(const std::string& flag_id) const {
  auto loc = locate_flag(flag_id);
  if (!loc) throw NotFoundError("unknown flag '" + flag_id + "'");
  const auto lines = parse_jsonl(epoch_dir(loc->epoch) / "flags.jsonl");
  return lines.at(loc->seq).get<FlaggedInstance>();
}

std::unordered_map<std::string, VerdictRecord> latest_verdicts(std::span<const VerdictRecord> verdicts) {
  std::unordered_map<std::string, VerdictRecord> out;
  for (const auto& v : verdicts) out.insert_or_assign(v.flag_id, v);
  return out;
}

FlagStatus effective_status(const FlaggedInstance& flag,
                            const std::unordered_map<std::string, VerdictRecord>& latest) {
  auto it = latest.find(flag.flag_id);
  return it == latest.end() ? flag.status : it->second.verdict;
}

}  // namespace modguard

// Copyright 2026 The crowdmw Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "crowdmw/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include "crowdmw/error.hpp"

namespace crowdmw {

namespace {

std::vector<std::string_view> SplitFields(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto at = s.find(sep, pos);
    out.push_back(s.substr(pos, at == std::string_view::npos ? std::string_view::npos : at - pos));
    if (at == std::string_view::npos) break;
    pos = at + 1;
  }
  return out;
}

template <typename T>
T ParseNumber(std::string_view s, std::string_view what) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kMalformed, "bad " + std::string(what) + " '" + std::string(s) + "'");
  }
  return value;
}

std::string NodeRecordLine(std::uint32_t id, const std::string& props) {
  return "NODE|" + std::to_string(id) + "," + props;
}

std::string ResultLine(const ResultTableRow& r) {
  return "RESULT|" + std::to_string(r.cycle_id) + "," + std::string(ToString(r.mode)) + "," + r.key +
         "," + std::to_string(r.count) + "," + std::to_string(r.committed_at_ms);
}

std::string ProgressLine(const ProgressRow& p) {
  return "PROGRESS|" + std::to_string(p.cycle_id) + "," + std::to_string(p.room) + "," +
         std::to_string(p.from_seq) + "," + std::to_string(p.to_seq);
}

void SyncFd(int fd) {
  if (::fsync(fd) != 0) {
    throw Error(ErrorCode::kStorageFailure, std::string("fsync: ") + std::strerror(errno));
  }
}

// Rows compare equal for idempotence regardless of commit time.
bool SameContents(const std::vector<ResultTableRow>& a, const std::vector<ResultTableRow>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].cycle_id != b[i].cycle_id || a[i].mode != b[i].mode || a[i].key != b[i].key ||
        a[i].count != b[i].count) {
      return false;
    }
  }
  return true;
}

}  // namespace

std::string_view ToString(NodeRole role) {
  return role == NodeRole::kLeader ? "LEADER" : "FOLLOWER";
}

std::string EncodeNetworkProps(const NodeRecord& record) {
  return record.address + ";" + std::string(ToString(record.role)) + ";" +
         std::to_string(record.last_seen_ms);
}

NodeTableRow ToNodeRow(const NodeRecord& record) {
  return {record.node_id.value, EncodeNetworkProps(record)};
}

NodeRecord DecodeNodeRow(const NodeTableRow& row) {
  const auto fields = SplitFields(row.network_props, ';');
  if (fields.size() != 3) {
    throw Error(ErrorCode::kMalformed, "network_props '" + row.network_props + "'");
  }
  NodeRecord rec;
  rec.node_id = NodeId{row.node_id};
  rec.address = std::string(fields[0]);
  if (fields[1] == "LEADER") {
    rec.role = NodeRole::kLeader;
  } else if (fields[1] == "FOLLOWER") {
    rec.role = NodeRole::kFollower;
  } else {
    throw Error(ErrorCode::kMalformed, "role '" + std::string(fields[1]) + "'");
  }
  rec.last_seen_ms = ParseNumber<std::int64_t>(fields[2], "last_seen");
  return rec;
}

// ---------------------------------------------------------------- backends

void MemoryBackend::append(std::span<const std::string> records) {
  records_.insert(records_.end(), records.begin(), records.end());
}

void MemoryBackend::rewrite(std::span<const std::string> records) {
  records_.assign(records.begin(), records.end());
}

JournalBackend::JournalBackend(std::filesystem::path path, bool fsync)
    : path_(std::move(path)), fsync_(fsync) {}

std::vector<std::string> JournalBackend::load() {
  std::vector<std::string> committed;
  std::ifstream in(path_, std::ios::binary);
  if (!in) {
    record_count_ = 0;
    return committed;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string data = ss.str();

  std::vector<std::string> batch;
  bool in_batch = false;
  std::size_t expected = 0;
  std::size_t pos = 0;
  while (pos < data.size()) {
    const auto space = data.find(' ', pos);
    if (space == std::string::npos) break;
    std::size_t len = 0;
    auto [ptr, ec] = std::from_chars(data.data() + pos, data.data() + space, len);
    if (ec != std::errc() || ptr != data.data() + space) break;
    if (space + 1 + len + 1 > data.size() || data[space + 1 + len] != '\n') break;
    std::string record = data.substr(space + 1, len);
    pos = space + 1 + len + 1;

    if (record.rfind("BEGIN|", 0) == 0) {
      batch.clear();
      try {
        expected = ParseNumber<std::size_t>(std::string_view(record).substr(6), "batch size");
        in_batch = true;
      } catch (const Error&) {
        break;
      }
    } else if (record.rfind("COMMIT|", 0) == 0) {
      if (in_batch && batch.size() == expected) {
        committed.insert(committed.end(), batch.begin(), batch.end());
      }
      batch.clear();
      in_batch = false;
    } else if (in_batch) {
      batch.push_back(std::move(record));
    }
  }
  // Drop whatever follows the last well-formed frame so later appends do
  // not land behind garbage.
  if (pos < data.size()) std::filesystem::resize_file(path_, pos);
  record_count_ = committed.size();
  return committed;
}

void JournalBackend::write_lines(std::span<const std::string> records,
                                 std::optional<std::size_t> limit) {
  std::vector<std::string> framed;
  framed.reserve(records.size() + 2);
  framed.push_back("BEGIN|" + std::to_string(records.size()));
  framed.insert(framed.end(), records.begin(), records.end());
  framed.push_back("COMMIT|" + std::to_string(records.size()));

  std::string buf;
  const std::size_t n = limit ? std::min(*limit, framed.size()) : framed.size();
  for (std::size_t i = 0; i < n; ++i) {
    buf += std::to_string(framed[i].size());
    buf += ' ';
    buf += framed[i];
    buf += '\n';
  }
  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) {
    throw Error(ErrorCode::kStorageFailure, "open " + path_.string() + ": " + std::strerror(errno));
  }
  std::size_t off = 0;
  while (off < buf.size()) {
    const ssize_t w = ::write(fd, buf.data() + off, buf.size() - off);
    if (w < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      throw Error(ErrorCode::kStorageFailure, std::string("write: ") + std::strerror(err));
    }
    off += static_cast<std::size_t>(w);
  }
  if (fsync_) {
    try {
      SyncFd(fd);
    } catch (...) {
      ::close(fd);
      throw;
    }
  }
  ::close(fd);
  if (limit) throw Error(ErrorCode::kStorageFailure, "injected crash mid-commit");
}

void JournalBackend::append(std::span<const std::string> records) {
  auto limit = crash_after_;
  crash_after_.reset();
  write_lines(records, limit);
  record_count_ += records.size();
}

void JournalBackend::rewrite(std::span<const std::string> records) {
  const std::filesystem::path tmp = path_.string() + ".tmp";
  std::filesystem::remove(tmp);
  JournalBackend fresh(tmp, fsync_);
  fresh.write_lines(records, std::nullopt);
  std::error_code ec;
  std::filesystem::rename(tmp, path_, ec);
  if (ec) throw Error(ErrorCode::kStorageFailure, "rename: " + ec.message());
  record_count_ = records.size();
}

// -------------------------------------------------------------------- store

Store::Store(std::unique_ptr<StoreBackend> backend) : backend_(std::move(backend)) {
  for (const auto& record : backend_->load()) apply(record);
}

std::unique_ptr<Store> Store::InMemory() {
  return std::make_unique<Store>(std::make_unique<MemoryBackend>());
}

std::unique_ptr<Store> Store::OpenJournal(const std::filesystem::path& path, bool fsync) {
  return std::make_unique<Store>(std::make_unique<JournalBackend>(path, fsync));
}

void Store::apply(std::string_view record) {
  const auto bar = record.find('|');
  if (bar == std::string_view::npos) throw Error(ErrorCode::kMalformed, std::string(record));
  const std::string_view table = record.substr(0, bar);
  const std::string_view body = record.substr(bar + 1);
  if (table == "NODE") {
    const auto comma = body.find(',');
    if (comma == std::string_view::npos) throw Error(ErrorCode::kMalformed, std::string(record));
    nodes_[ParseNumber<std::uint32_t>(body.substr(0, comma), "node id")] =
        std::string(body.substr(comma + 1));
  } else if (table == "RESULT") {
    const auto f = SplitFields(body, ',');
    if (f.size() != 5) throw Error(ErrorCode::kMalformed, std::string(record));
    ResultTableRow row;
    row.cycle_id = ParseNumber<std::uint64_t>(f[0], "cycle id");
    row.mode = ParseCountMode(f[1]);
    row.key = std::string(f[2]);
    row.count = ParseNumber<std::uint64_t>(f[3], "count");
    row.committed_at_ms = ParseNumber<std::int64_t>(f[4], "committed_at");
    results_[row.cycle_id].push_back(std::move(row));
  } else if (table == "PROGRESS") {
    const auto f = SplitFields(body, ',');
    if (f.size() != 4) throw Error(ErrorCode::kMalformed, std::string(record));
    ProgressRow p;
    p.cycle_id = ParseNumber<std::uint64_t>(f[0], "cycle id");
    p.room = ParseNumber<int>(f[1], "room");
    p.from_seq = ParseNumber<std::uint64_t>(f[2], "from");
    p.to_seq = ParseNumber<std::uint64_t>(f[3], "to");
    watermarks_[p.room] = std::max(watermarks_[p.room], p.to_seq);
    progress_[p.cycle_id].push_back(p);
  } else {
    throw Error(ErrorCode::kMalformed, "unknown table in '" + std::string(record) + "'");
  }
}

std::vector<std::string> Store::state_records() const {
  std::vector<std::string> out;
  for (const auto& [id, props] : nodes_) out.push_back(NodeRecordLine(id, props));
  for (const auto& [cycle, rows] : results_) {
    for (const auto& r : rows) out.push_back(ResultLine(r));
  }
  for (const auto& [cycle, rows] : progress_) {
    for (const auto& p : rows) out.push_back(ProgressLine(p));
  }
  return out;
}

void Store::write_batch(std::vector<std::string> records) {
  backend_->append(records);
  for (const auto& r : records) apply(r);
  if (backend_->record_count() > compaction_threshold_) backend_->rewrite(state_records());
}

NodeTableRow Store::upsert_node(const NodeTableRow& row) {
  upsert_nodes(std::span<const NodeTableRow>(&row, 1));
  return row;
}

void Store::upsert_nodes(std::span<const NodeTableRow> rows) {
  std::vector<std::string> records;
  for (const auto& row : rows) {
    DecodeNodeRow(row);
    records.push_back(NodeRecordLine(row.node_id, row.network_props));
  }
  std::unique_lock lock(mu_);
  write_batch(std::move(records));
}

RegistrySnapshot Store::snapshot_nodes(std::int64_t now_ms) const {
  std::shared_lock lock(mu_);
  RegistrySnapshot snap;
  snap.taken_at_ms = now_ms;
  for (const auto& [id, props] : nodes_) snap.records.push_back(DecodeNodeRow({id, props}));
  return snap;
}

std::vector<NodeTableRow> Store::node_rows() const {
  std::shared_lock lock(mu_);
  std::vector<NodeTableRow> out;
  for (const auto& [id, props] : nodes_) out.push_back({id, props});
  return out;
}

std::vector<ResultTableRow> Store::commit_results(const CycleResult& result,
                                                  std::span<const CountMode> modes,
                                                  std::span<const ProgressRow> progress,
                                                  std::int64_t now_ms) {
  std::vector<ResultTableRow> rows;
  auto wants = [&](CountMode m) { return std::find(modes.begin(), modes.end(), m) != modes.end(); };
  if (wants(CountMode::kVisitor)) {
    for (const auto& [tag, count] : result.visitor_aggregates) {
      rows.push_back({result.cycle_id, CountMode::kVisitor, std::string(ToString(tag)), count, now_ms});
    }
  }
  if (wants(CountMode::kRoom)) {
    for (const auto& [room, count] : result.room_aggregates) {
      rows.push_back({result.cycle_id, CountMode::kRoom, RoomKey(room), count, now_ms});
    }
  }
  std::vector<ProgressRow> prog(progress.begin(), progress.end());
  std::sort(prog.begin(), prog.end(), [](const ProgressRow& a, const ProgressRow& b) { return a.room < b.room; });
  for (const auto& p : prog) {
    if (p.cycle_id != result.cycle_id || p.to_seq <= p.from_seq) {
      throw Error(ErrorCode::kInvalidArgument, "bad progress range for room " + std::to_string(p.room));
    }
  }

  std::unique_lock lock(mu_);
  const auto existing = results_.find(result.cycle_id);
  const auto existing_prog = progress_.find(result.cycle_id);
  if (existing != results_.end() || existing_prog != progress_.end()) {
    const std::vector<ResultTableRow> none;
    const std::vector<ProgressRow> no_prog;
    const auto& have = existing != results_.end() ? existing->second : none;
    const auto& have_prog = existing_prog != progress_.end() ? existing_prog->second : no_prog;
    if (SameContents(have, rows) && have_prog == prog) return have;
    throw Error(ErrorCode::kConflictingCommit,
                "cycle " + std::to_string(result.cycle_id) + " already committed with different contents");
  }
  for (const auto& p : prog) {
    const auto it = watermarks_.find(p.room);
    const std::uint64_t current = it == watermarks_.end() ? 0 : it->second;
    if (p.from_seq != current) {
      throw Error(ErrorCode::kConflictingCommit,
                  "room " + std::to_string(p.room) + " progress starts at " + std::to_string(p.from_seq) +
                      " but watermark is " + std::to_string(current));
    }
  }

  std::vector<std::string> records;
  for (const auto& r : rows) records.push_back(ResultLine(r));
  for (const auto& p : prog) records.push_back(ProgressLine(p));
  if (!records.empty()) write_batch(std::move(records));
  return rows;
}

std::vector<ResultTableRow> Store::results() const {
  std::shared_lock lock(mu_);
  std::vector<ResultTableRow> out;
  for (const auto& [cycle, rows] : results_) out.insert(out.end(), rows.begin(), rows.end());
  return out;
}

std::vector<ResultTableRow> Store::results_for(std::uint64_t cycle_id) const {
  std::shared_lock lock(mu_);
  const auto it = results_.find(cycle_id);
  return it == results_.end() ? std::vector<ResultTableRow>{} : it->second;
}

std::vector<ProgressRow> Store::progress() const {
  std::shared_lock lock(mu_);
  std::vector<ProgressRow> out;
  for (const auto& [cycle, rows] : progress_) out.insert(out.end(), rows.begin(), rows.end());
  return out;
}

std::vector<std::uint64_t> Store::committed_cycles() const {
  std::shared_lock lock(mu_);
  std::vector<std::uint64_t> out;
  for (const auto& [cycle, rows] : results_) out.push_back(cycle);
  for (const auto& [cycle, rows] : progress_) {
    if (!results_.count(cycle)) out.push_back(cycle);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::map<int, std::uint64_t> Store::watermarks() const {
  std::shared_lock lock(mu_);
  return watermarks_;
}

std::string Store::dump() const {
  std::shared_lock lock(mu_);
  std::string out;
  for (const auto& r : state_records()) {
    out += r;
    out += '\n';
  }
  return out;
}

}  // namespace crowdmw

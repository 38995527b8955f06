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

#pragma once

// Results store: the node table and the results table, plus the per-room
// progress ranges that make commits exactly-once.
//
// Every mutation is one atomic batch handed to a StoreBackend. The journal
// backend writes length-prefixed UTF-8 lines of the form "TABLE|f1,f2,..."
// framed by BEGIN/COMMIT markers:
//
//   18 BEGIN|3
//   33 RESULT|4,visitor,man,10,8123
//   ...
//   19 COMMIT|3
//
// Each line is "<byte length> <record>\n". Batches without a matching
// COMMIT (a crash mid-write) are ignored on load.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crowdmw/domain.hpp"
#include "crowdmw/mapreduce.hpp"

namespace crowdmw {

enum class NodeRole : std::uint8_t { kFollower, kLeader };

std::string_view ToString(NodeRole role);

struct NodeRecord {
  NodeId node_id;
  std::string address;  // host:port
  NodeRole role = NodeRole::kFollower;
  std::int64_t last_seen_ms = 0;

  friend bool operator==(const NodeRecord&, const NodeRecord&) = default;
};

struct RegistrySnapshot {
  std::vector<NodeRecord> records;  // ascending node id
  std::int64_t taken_at_ms = 0;
};

// Node table row: the integer id and a single varchar holding
// "host:port;role;last_seen_ms".
struct NodeTableRow {
  std::uint32_t node_id = 0;
  std::string network_props;

  friend bool operator==(const NodeTableRow&, const NodeTableRow&) = default;
};

std::string EncodeNetworkProps(const NodeRecord& record);
// Throws kMalformed.
NodeRecord DecodeNodeRow(const NodeTableRow& row);
NodeTableRow ToNodeRow(const NodeRecord& record);

struct ResultTableRow {
  std::uint64_t cycle_id = 0;
  CountMode mode = CountMode::kVisitor;
  std::string key;
  std::uint64_t count = 0;
  std::int64_t committed_at_ms = 0;

  friend bool operator==(const ResultTableRow&, const ResultTableRow&) = default;
};

// Readings of `room` with from_seq <= seq < to_seq were consumed by
// `cycle_id`: counted in its results, or dropped as doorway double reads.
struct ProgressRow {
  std::uint64_t cycle_id = 0;
  int room = 0;
  std::uint64_t from_seq = 0;
  std::uint64_t to_seq = 0;

  friend bool operator==(const ProgressRow&, const ProgressRow&) = default;
};

class StoreBackend {
 public:
  virtual ~StoreBackend() = default;
  // Records of every fully committed batch, in order.
  virtual std::vector<std::string> load() = 0;
  // All or nothing. Throws kStorageFailure.
  virtual void append(std::span<const std::string> records) = 0;
  // Replaces the whole log with one batch (compaction).
  virtual void rewrite(std::span<const std::string> records) = 0;
  virtual std::size_t record_count() const = 0;
};

class MemoryBackend final : public StoreBackend {
 public:
  std::vector<std::string> load() override { return records_; }
  void append(std::span<const std::string> records) override;
  void rewrite(std::span<const std::string> records) override;
  std::size_t record_count() const override { return records_.size(); }

 private:
  std::vector<std::string> records_;
};

class JournalBackend final : public StoreBackend {
 public:
  // `fsync` makes every batch durable before append returns.
  explicit JournalBackend(std::filesystem::path path, bool fsync = true);

  std::vector<std::string> load() override;
  void append(std::span<const std::string> records) override;
  void rewrite(std::span<const std::string> records) override;
  std::size_t record_count() const override { return record_count_; }

  // Test hook: the next append writes only `n` lines of its batch, then
  // throws kStorageFailure as if the process died mid-write.
  void crash_after_lines(std::size_t n) { crash_after_ = n; }

  const std::filesystem::path& path() const { return path_; }

 private:
  void write_lines(std::span<const std::string> lines, std::optional<std::size_t> limit);

  std::filesystem::path path_;
  bool fsync_;
  std::size_t record_count_ = 0;
  std::optional<std::size_t> crash_after_;
};

class Store {
 public:
  explicit Store(std::unique_ptr<StoreBackend> backend);

  static std::unique_ptr<Store> InMemory();
  static std::unique_ptr<Store> OpenJournal(const std::filesystem::path& path, bool fsync = true);

  // Insert or update by node id. Throws kStorageFailure, kInvalidArgument.
  NodeTableRow upsert_node(const NodeTableRow& row);
  // Several rows in one atomic batch.
  void upsert_nodes(std::span<const NodeTableRow> rows);

  RegistrySnapshot snapshot_nodes(std::int64_t now_ms = 0) const;
  std::vector<NodeTableRow> node_rows() const;

  // Writes the rows of `modes` plus the progress ranges atomically.
  // Re-committing an identical cycle is a no-op; a cycle id that already
  // holds different contents, or progress that does not start at the
  // current watermark of its room, throws kConflictingCommit.
  std::vector<ResultTableRow> commit_results(const CycleResult& result,
                                             std::span<const CountMode> modes,
                                             std::span<const ProgressRow> progress,
                                             std::int64_t now_ms);

  std::vector<ResultTableRow> results() const;
  std::vector<ResultTableRow> results_for(std::uint64_t cycle_id) const;
  std::vector<ProgressRow> progress() const;
  std::vector<std::uint64_t> committed_cycles() const;
  // Next unconsumed sequence number per room; rooms never seen map to 0.
  std::map<int, std::uint64_t> watermarks() const;

  // Journal record count above which the log is rewritten from state.
  void set_compaction_threshold(std::size_t records) { compaction_threshold_ = records; }

  // Canonical dump of all tables; equal stores dump equal text.
  std::string dump() const;

 private:
  void apply(std::string_view record);
  std::vector<std::string> state_records() const;
  void write_batch(std::vector<std::string> records);

  std::unique_ptr<StoreBackend> backend_;
  mutable std::shared_mutex mu_;
  std::map<std::uint32_t, std::string> nodes_;
  std::map<std::uint64_t, std::vector<ResultTableRow>> results_;
  std::map<std::uint64_t, std::vector<ProgressRow>> progress_;
  std::map<int, std::uint64_t> watermarks_;
  std::size_t compaction_threshold_ = 1 << 16;
};

}  // namespace crowdmw

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

// Scenario runner: boots a cluster on the simulated or UDP backend,
// injects faults, collects metrics and reconciles the store against the
// generator's ledger.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crowdmw/node.hpp"
#include "crowdmw/runtime.hpp"
#include "crowdmw/simgen.hpp"
#include "crowdmw/store.hpp"
#include "crowdmw/transport.hpp"

namespace crowdmw {

struct FaultSpec {
  enum class Kind : std::uint8_t { kKillLeader, kKillNode, kSetLoss, kPartition };
  Kind kind = Kind::kKillLeader;
  std::int64_t at_ms = 0;
  NodeId node;                // kKillNode
  double rate = 0.0;          // kSetLoss
  std::vector<NodeId> group;  // kPartition
  std::int64_t duration_ms = 0;

  friend bool operator==(const FaultSpec&, const FaultSpec&) = default;
};

// "kill_leader@<ms>", "kill_node:<id>@<ms>", "set_loss:<rate>@<ms>",
// "partition:<id>,<id>...:<duration_ms>@<ms>". Throws kConfigError.
FaultSpec ParseFault(std::string_view text);
std::string ToString(const FaultSpec& fault);

struct ScenarioConfig {
  int node_count = 3;
  CycleConfig cycle;
  NetConfig net;
  VisitorModel visitors;
  // When set, the named fixture is replayed instead of a generated stream
  // and every room is carried by `fixture_node`.
  std::string fixture;
  NodeId fixture_node{1};
  int cycles_to_run = 3;
  std::vector<FaultSpec> faults;
  std::vector<CountMode> modes{CountMode::kVisitor, CountMode::kRoom};
  std::optional<NodeId> leader_override;
  // Extra DATA_SUBMIT requests per cycle, spread over the non-leader nodes.
  int load_requests = 0;
  // Empty means an in-memory store.
  std::filesystem::path store_path;
  int udp_base_port = 47000;

  // Throws kConfigError.
  void Validate() const;
  std::int64_t run_duration_ms() const { return (cycles_to_run + 1) * cycle.cycle_duration_ms; }
};

// Plain-text "key=value" lines; '#' starts a comment; "fault=" may repeat.
// Throws kConfigError.
ScenarioConfig ParseScenarioText(std::string_view text, ScenarioConfig base = {});
// Throws kIoFailure, kConfigError.
ScenarioConfig LoadScenarioFile(const std::filesystem::path& path, ScenarioConfig base = {});
// CROWDMW_SEED and CROWDMW_BACKEND.
void ApplyEnvironment(ScenarioConfig& config);
// Parses "visitor", "room" or "both".
std::vector<CountMode> ParseModes(std::string_view text);

struct ElectionEvent {
  std::int64_t t_us = 0;
  NodeId elector;
  NodeId elected;
};
struct CommitEvent {
  std::int64_t t_us = 0;
  NodeId leader;
  std::uint64_t cycle = 0;
  std::uint64_t readings = 0;
};
struct AbortEvent {
  NodeId leader;
  std::uint64_t cycle = 0;
  std::string reason;
};

struct KillEvent {
  std::int64_t t_us = 0;
  NodeId node;
};

struct NodeBelief {
  bool alive = false;
  bool is_leader = false;
  std::optional<NodeId> known_leader;
};
// What every node believes just before a cycle boundary.
struct CycleBeliefs {
  std::uint64_t cycle = 0;
  std::map<NodeId, NodeBelief> nodes;
};

struct Reconciliation {
  bool ok = false;
  std::uint64_t generated = 0;   // ledger readings that are not double reads
  std::uint64_t duplicates = 0;  // double reads in the ledger
  std::uint64_t committed = 0;   // readings counted by committed cycles
  std::uint64_t pending = 0;     // generated but not yet committed
  std::string detail;
};

struct SummaryRow {
  std::string metric;
  std::size_t count = 0;
  double mean = 0;
  double p50 = 0;
  double p95 = 0;
  double p99 = 0;
};

struct MetricsReport {
  std::vector<MetricSample> samples;
  std::vector<std::string> events;
  std::vector<ElectionEvent> elections;
  std::vector<CommitEvent> commits;
  std::vector<AbortEvent> aborts;
  std::vector<CycleBeliefs> beliefs;
  std::vector<KillEvent> killed;
  std::uint64_t completed_cycles = 0;
  Reconciliation reconciliation;

  std::vector<SummaryRow> summary() const;
  std::vector<double> values(std::string_view kind) const;
  double mean(std::string_view kind) const;
};

struct ScenarioOutcome {
  MetricsReport report;
  std::unique_ptr<Store> store;
  GenerationLedger ledger;
};

// Throws kConfigError, kScenarioDeadlock.
ScenarioOutcome RunScenario(const ScenarioConfig& config);

// Compares committed PROGRESS ranges and result rows against the ledger.
Reconciliation Reconcile(const GenerationLedger& ledger, const Store& store,
                         std::span<const CountMode> modes, int room_count = kDefaultRoomCount);

// Nearest-rank percentile of unsorted values; 0 for an empty input.
double Percentile(std::vector<double> values, double p);

// One row per count: "requests,mean_response_ms,rtt_ms,ttfb_ms".
// A request is one probe DATA_SUBMIT sent in a cycle. Throws kConfigError
// when counts are not ascending.
std::string SweepLoad(const ScenarioConfig& config, std::span<const int> request_counts);

// Writes metrics.csv, summary.csv and events.log under `dir`.
// Throws kIoFailure.
void EmitReport(const MetricsReport& report, const std::filesystem::path& dir);
std::string MetricsCsv(const MetricsReport& report);
std::string SummaryCsv(const MetricsReport& report);

// Kills the leader once per cycle and reports who takes over.
std::vector<std::string> ElectionDemo(int node_count, std::uint64_t seed, int cycles);

}  // namespace crowdmw

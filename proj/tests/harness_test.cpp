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


#include "crowdmw/harness.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_util.hpp"

namespace crowdmw {
namespace {

using testing::ThrowsCode;

std::string Slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path Scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("crowdmw_harness_" + std::to_string(::getpid()) + "_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

ScenarioConfig Seeded(std::uint64_t seed) {
  ScenarioConfig c;
  c.node_count = 4;
  c.cycles_to_run = 4;
  c.net.seed = c.visitors.seed = seed;
  c.net.loss_rate = 0.1;
  c.visitors.visitor_count = 25;
  c.faults = {ParseFault("kill_leader@2900")};
  return c;
}

TEST(Faults, ParseAndPrint) {
  for (const char* text : {"kill_leader@1000", "kill_node:3@20", "set_loss:0.25@5", "partition:1,2:300@7"}) {
    EXPECT_EQ(ToString(ParseFault(text)), text);
  }
  const auto p = ParseFault("partition:1,2:300@7");
  EXPECT_EQ(p.kind, FaultSpec::Kind::kPartition);
  EXPECT_EQ(p.group, (std::vector<NodeId>{NodeId{1}, NodeId{2}}));
  EXPECT_EQ(p.duration_ms, 300);
  EXPECT_TRUE(ThrowsCode([] { ParseFault("kill_leader"); }, ErrorCode::kConfigError));
  EXPECT_TRUE(ThrowsCode([] { ParseFault("explode@1"); }, ErrorCode::kConfigError));
}

TEST(ScenarioText, ParsesKeysAndComments) {
  const auto c = ParseScenarioText(
      "# demo\n"
      "nodes = 5\ncycles=2\nseed=9\nloss=0.2\ncycle_ms=3000\nwindow_ms=600\n"
      "visitors=12\ntag_mix=0.2,0.3,0.5\nmode=room\noverride=4\n"
      "fault=kill_leader@100\nfault=set_loss:0@200  # heal\n");
  EXPECT_EQ(c.node_count, 5);
  EXPECT_EQ(c.cycles_to_run, 2);
  EXPECT_EQ(c.net.seed, 9u);
  EXPECT_EQ(c.visitors.seed, 9u);
  EXPECT_DOUBLE_EQ(c.net.loss_rate, 0.2);
  EXPECT_EQ(c.cycle.cycle_duration_ms, 3000);
  EXPECT_EQ(c.cycle.mapreduce_window_ms, 600);
  EXPECT_EQ(c.visitors.visitor_count, 12);
  EXPECT_DOUBLE_EQ(c.visitors.tag_mix[2], 0.5);
  EXPECT_EQ(c.modes, (std::vector<CountMode>{CountMode::kRoom}));
  EXPECT_EQ(c.leader_override, NodeId{4});
  EXPECT_EQ(c.faults.size(), 2u);
  EXPECT_NO_THROW(c.Validate());

  EXPECT_TRUE(ThrowsCode([] { ParseScenarioText("bogus=1"); }, ErrorCode::kConfigError));
  EXPECT_TRUE(ThrowsCode([] { ParseScenarioText("nodes"); }, ErrorCode::kConfigError));
  EXPECT_TRUE(ThrowsCode([] { ParseScenarioText("nodes=x"); }, ErrorCode::kConfigError));
  EXPECT_TRUE(ThrowsCode([] { ParseModes("both,room"); }, ErrorCode::kConfigError));
}

TEST(ScenarioText, LaterLayersOverride) {
  ScenarioConfig base = ParseScenarioText("seed=1\nbackend=sim\nnodes=3\n");
  ::setenv("CROWDMW_SEED", "77", 1);
  ::setenv("CROWDMW_BACKEND", "udp", 1);
  ApplyEnvironment(base);
  ::unsetenv("CROWDMW_SEED");
  ::unsetenv("CROWDMW_BACKEND");
  EXPECT_EQ(base.net.seed, 77u);
  EXPECT_EQ(base.net.mode, Backend::kUdp);
  EXPECT_EQ(base.node_count, 3);
  // A file layered on top replaces its faults wholesale.
  base.faults = {ParseFault("kill_leader@5")};
  const auto next = ParseScenarioText("fault=kill_node:1@6\n", base);
  ASSERT_EQ(next.faults.size(), 1u);
  EXPECT_EQ(next.faults[0].kind, FaultSpec::Kind::kKillNode);
}

TEST(ScenarioConfig, Validation) {
  ScenarioConfig c;
  c.node_count = 0;
  EXPECT_TRUE(ThrowsCode([&] { c.Validate(); }, ErrorCode::kConfigError));
  c = {};
  c.faults = {ParseFault("kill_node:9@10")};
  EXPECT_TRUE(ThrowsCode([&] { c.Validate(); }, ErrorCode::kConfigError));
  c = {};
  c.net.mode = Backend::kUdp;
  c.faults = {ParseFault("partition:1:10@10")};
  EXPECT_TRUE(ThrowsCode([&] { c.Validate(); }, ErrorCode::kConfigError));
  c = {};
  c.fixture = "table1";
  c.fixture_node = NodeId{4};
  EXPECT_TRUE(ThrowsCode([&] { c.Validate(); }, ErrorCode::kConfigError));
  c = {};
  c.fixture = "missing";
  EXPECT_TRUE(ThrowsCode([&] { RunScenario(c); }, ErrorCode::kUnknownFixture));
  EXPECT_TRUE(ThrowsCode([] { LoadScenarioFile("/nonexistent/x.conf"); }, ErrorCode::kIoFailure));
}

TEST(RunScenario, FixtureVisitorRows) {
  ScenarioConfig c;
  c.cycles_to_run = 1;
  c.fixture = "table1";
  c.modes = {CountMode::kVisitor};
  const auto out = RunScenario(c);
  std::map<std::string, std::uint64_t> got;
  for (const auto& r : out.store->results()) {
    EXPECT_EQ(r.mode, CountMode::kVisitor);
    got[r.key] = r.count;
  }
  EXPECT_EQ(got, (std::map<std::string, std::uint64_t>{{"man", 10}, {"woman", 21}, {"other", 12}}));
}

TEST(RunScenario, DeterministicAcrossRuns) {
  const auto a = RunScenario(Seeded(5));
  const auto b = RunScenario(Seeded(5));
  EXPECT_EQ(a.report.events, b.report.events);
  EXPECT_EQ(MetricsCsv(a.report), MetricsCsv(b.report));
  EXPECT_EQ(SummaryCsv(a.report), SummaryCsv(b.report));
  EXPECT_EQ(a.store->dump(), b.store->dump());
  EXPECT_NE(a.report.events, RunScenario(Seeded(6)).report.events);
}

TEST(RunScenario, TotalLossMeansReelectionNotDeadlock) {
  ScenarioConfig c;
  c.node_count = 2;
  c.cycles_to_run = 12;
  c.visitors.visitor_count = 10;
  c.faults = {ParseFault("set_loss:1@0")};
  const auto out = RunScenario(c);
  EXPECT_TRUE(out.report.commits.empty());
  EXPECT_TRUE(out.store->results().empty());
  EXPECT_GE(out.report.elections.size(), 12u);
}

TEST(RunScenario, JournalStoreMatchesMemoryStore) {
  auto c = Seeded(3);
  const auto mem = RunScenario(c);
  const auto dir = Scratch("journal");
  std::filesystem::create_directories(dir);
  c.store_path = dir / "store.journal";
  const auto disk = RunScenario(c);
  EXPECT_EQ(mem.store->dump(), disk.store->dump());
  EXPECT_EQ(Store::OpenJournal(c.store_path)->dump(), mem.store->dump());
  std::filesystem::remove_all(dir);
}

TEST(Reconcile, DetectsDoubleCountsAndGaps) {
  const auto readings = ParseFixtureText(testing::kFixtureText);
  const auto ledger = LedgerFor(readings);
  const std::vector<CountMode> room{CountMode::kRoom};
  auto store = Store::InMemory();
  auto rec = Reconcile(ledger, *store, room);
  EXPECT_TRUE(rec.ok) << rec.detail;
  EXPECT_EQ(rec.pending, 16u);

  const auto result = MakeCycleResult(0, {}, {{"Room1", 2}, {"Room2", 5}, {"Room3", 5}, {"Room4", 4}}, 16);
  std::vector<ProgressRow> prog;
  for (int r = 1; r <= 4; ++r) prog.push_back({0, r, 0, r == 1 ? 2u : r == 4 ? 4u : 5u});
  store->commit_results(result, room, prog, 0);
  rec = Reconcile(ledger, *store, room);
  EXPECT_TRUE(rec.ok) << rec.detail;
  EXPECT_EQ(rec.committed, 16u);
  EXPECT_EQ(rec.pending, 0u);

  // Same ranges, inflated counts: a double count must be flagged.
  auto bad = Store::InMemory();
  auto inflated = result;
  inflated.room_aggregates[RoomId{1}] = 3;
  bad->commit_results(inflated, room, prog, 0);
  EXPECT_FALSE(Reconcile(ledger, *bad, room).ok);
}

TEST(Percentile, NearestRank) {
  EXPECT_EQ(Percentile({}, 50), 0.0);
  EXPECT_EQ(Percentile({5, 1, 3}, 50), 3.0);
  EXPECT_EQ(Percentile({1, 2, 3, 4}, 95), 4.0);
  EXPECT_EQ(Percentile({1, 2, 3, 4}, 25), 1.0);
}

TEST(EmitReport, FilesAreStableAndConsistent) {
  const auto out = RunScenario(Seeded(2));
  const auto dir = Scratch("report");
  EmitReport(out.report, dir);
  const auto metrics = Slurp(dir / "metrics.csv");
  const auto summary = Slurp(dir / "summary.csv");
  const auto events = Slurp(dir / "events.log");
  EXPECT_EQ(metrics.rfind("kind,node,cycle,t_ms,value\n", 0), 0u);
  EXPECT_EQ(summary.rfind("metric,count,mean,p50,p95,p99\n", 0), 0u);
  EXPECT_EQ(static_cast<std::size_t>(std::count(metrics.begin(), metrics.end(), '\n')),
            out.report.samples.size() + 1);
  EXPECT_EQ(static_cast<std::size_t>(std::count(events.begin(), events.end(), '\n')),
            out.report.events.size());
  // Every metric sample also appears in the event log.
  std::size_t metric_lines = 0;
  for (const auto& e : out.report.events) metric_lines += e.find(" METRIC ") != std::string::npos;
  EXPECT_EQ(metric_lines, out.report.samples.size());
  EmitReport(out.report, dir);
  EXPECT_EQ(Slurp(dir / "metrics.csv"), metrics);
  EXPECT_EQ(Slurp(dir / "summary.csv"), summary);
  EXPECT_EQ(Slurp(dir / "events.log"), events);
  std::filesystem::remove_all(dir);
}

TEST(SweepLoad, ShapeAndOrdering) {
  ScenarioConfig c;
  c.cycles_to_run = 2;
  EXPECT_EQ(SweepLoad(c, {}), "requests,mean_response_ms,rtt_ms,ttfb_ms\n");
  const std::vector<int> counts{0, 100};
  const auto csv = SweepLoad(c, counts);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_NE(csv.find("\n0,"), std::string::npos);
  EXPECT_NE(csv.find("\n100,"), std::string::npos);
  const std::vector<int> descending{5, 1};
  EXPECT_TRUE(ThrowsCode([&] { SweepLoad(c, descending); }, ErrorCode::kConfigError));
}

TEST(ElectionDemo, SuccessionFollowsIds) {
  const auto lines = ElectionDemo(4, 1, 6);
  ASSERT_FALSE(lines.empty());
  EXPECT_EQ(lines.front().rfind("cycle 0: leader=4", 0), 0u) << lines.front();
  ASSERT_EQ(lines.size(), 7u);
  EXPECT_EQ(lines[2].rfind("cycle 2: leader=3", 0), 0u) << lines[2];
  EXPECT_EQ(lines[4].rfind("cycle 4: leader=2", 0), 0u) << lines[4];
  EXPECT_NE(lines[1].find("killed node 4"), std::string::npos) << lines[1];
}

TEST(UdpBackend, FixtureOverLoopback) {
  ScenarioConfig c;
  c.net.mode = Backend::kUdp;
  c.net.latency_min_ms = 0;
  c.net.latency_max_ms = 0;
  c.cycle.cycle_duration_ms = 1000;
  c.cycle.mapreduce_window_ms = 400;
  c.cycles_to_run = 2;
  c.fixture = "table1";
  c.udp_base_port = 47000 + static_cast<int>(::getpid() % 1000) * 10;
  const auto out = RunScenario(c);
  std::map<std::string, std::uint64_t> got;
  for (const auto& r : out.store->results()) {
    if (r.mode == CountMode::kVisitor) got[r.key] += r.count;
  }
  EXPECT_EQ(got, (std::map<std::string, std::uint64_t>{{"man", 10}, {"woman", 21}, {"other", 12}}));
  EXPECT_TRUE(out.report.reconciliation.ok) << out.report.reconciliation.detail;
}

}  // namespace
}  // namespace crowdmw

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


// Acceptance runner: prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "crowdmw/error.hpp"
#include "crowdmw/harness.hpp"
#include "crowdmw/mapreduce.hpp"
#include "crowdmw/message.hpp"
#include "crowdmw/runtime.hpp"
#include "crowdmw/simgen.hpp"

namespace crowdmw {
namespace {

using Counts = std::map<std::string, std::uint64_t>;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string Show(const Counts& c) {
  std::string out = "{";
  for (const auto& [k, v] : c) out += (out.size() > 1 ? "," : "") + k + ":" + std::to_string(v);
  return out + "}";
}

// Brute-force oracles, written independently of the library's aggregation code.
Counts OracleVisitor(const std::vector<SensorReading>& rs) {
  Counts out;
  for (const auto& r : rs) {
    const char* name = r.tag == TagCategory::kMan ? "man" : r.tag == TagCategory::kWoman ? "woman" : "other";
    out[name] += static_cast<std::uint64_t>(r.room.number);
  }
  return out;
}

Counts OracleRoom(const std::vector<SensorReading>& rs) {
  Counts out;
  for (const auto& r : rs) out["Room" + std::to_string(r.room.number)] += 1;
  return out;
}

Counts Committed(const Store& store, CountMode mode) {
  Counts out;
  for (const auto& r : store.results()) {
    if (r.mode == mode) out[r.key] += r.count;
  }
  return out;
}

Verdict FixtureCounts(CountMode mode) {
  ScenarioConfig c;
  c.node_count = 3;
  c.cycles_to_run = 1;
  c.fixture = "table1";
  c.modes = {mode};
  const auto out = RunScenario(c);
  const auto fixture = ReplayFixture("table1");
  const Counts want = mode == CountMode::kVisitor ? Counts{{"man", 10}, {"woman", 21}, {"other", 12}}
                                                  : OracleRoom(fixture);
  const Counts got = Committed(*out.store, mode);
  bool pass = got == want && out.report.commits.size() == 1;
  if (mode == CountMode::kVisitor) pass = pass && OracleVisitor(fixture) == want;
  std::uint64_t total = 0;
  for (const auto& [k, v] : got) total += v;
  if (mode == CountMode::kRoom) pass = pass && total == 16;
  return {pass, "committed=" + Show(got) + " expected=" + Show(want) +
                    (mode == CountMode::kRoom ? " total=" + std::to_string(total) : "")};
}

SegmentReduction HonestRemote(const Segment& s, const std::vector<CountMode>& modes) {
  const auto wire = DecodeSegmentBody(EncodeSegmentBody(s));
  return DecodeReduceBody(EncodeReduceBody(ReduceAssigned(wire, s.assignee, modes)), s.assignee);
}

Verdict DistributionEquivalence() {
  std::mt19937_64 rng(20260101);
  const std::vector<CountMode> both{CountMode::kVisitor, CountMode::kRoom};
  int failures = 0;
  int leader_cycles = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 10 + static_cast<int>(rng() % 1991);
    const int clients = 1 + static_cast<int>(rng() % 8);
    std::vector<SensorReading> readings;
    std::map<int, std::uint64_t> seq;
    for (int i = 0; i < n; ++i) {
      SensorReading r;
      r.tag = kAllTags[rng() % 3];
      r.room = RoomId{1 + static_cast<int>(rng() % 4)};
      r.seq = seq[r.room.number]++;
      r.timestamp_ms = i;
      readings.push_back(r);
    }
    const Counts want[2] = {OracleVisitor(readings), OracleRoom(readings)};

    // Plain pipeline: map, sort, partition, reduce, merge.
    std::vector<NodeId> ids;
    for (int k = 0; k < clients; ++k) ids.push_back(NodeId{static_cast<std::uint32_t>(10 + 7 * k)});
    for (int m = 0; m < 2; ++m) {
      std::vector<KeyValuePair> pairs;
      for (const auto& r : readings) pairs.push_back(MapReading(r, both[m]));
      std::vector<PartialResult> partials;
      for (const auto& seg : Partition(SortPairs(std::move(pairs)), ids)) {
        partials.push_back(ReduceSegment(seg, both[m]));
      }
      const auto merged = MergePartials(partials, both[m]).aggregates;
      if (Counts(merged.begin(), merged.end()) != want[m]) ++failures;
    }

    // Full leader cycle through the wire codecs when a quorum exists.
    if (clients >= 2) {
      ++leader_cycles;
      std::vector<std::vector<SensorReading>> split(clients);
      for (const auto& r : readings) split[rng() % clients].push_back(r);
      std::vector<Submission> subs;
      for (int k = 0; k < clients; ++k) subs.push_back(MakeSubmission(ids[k], "10.0.0.1:7000", split[k]));
      const auto out = LeaderCycle(0, ids.back(), subs, CycleConfig{}, both, {},
                                   [&](const Segment& s) { return std::optional(HonestRemote(s, both)); });
      if (!out.committed) {
        ++failures;
        continue;
      }
      Counts v, r;
      for (const auto& [tag, c] : out.result->visitor_aggregates) v[std::string(ToString(tag))] = c;
      for (const auto& [room, c] : out.result->room_aggregates) r[RoomKey(room)] = c;
      if (v != want[0] || r != want[1]) ++failures;
    }
  }
  return {failures == 0, "streams=200 pipeline_checks=400 leader_cycles=" + std::to_string(leader_cycles) +
                             " mismatches=" + std::to_string(failures)};
}

Verdict ElectionSafety() {
  std::mt19937_64 rng(4242);
  int bad = 0;
  std::string first_bad;
  for (int s = 0; s < 100; ++s) {
    ScenarioConfig c;
    c.node_count = 3 + static_cast<int>(rng() % 6);
    c.cycles_to_run = 3;
    c.net.seed = c.visitors.seed = 1000 + s;
    c.visitors.visitor_count = 10;
    const std::int64_t d = c.cycle.cycle_duration_ms;
    if (s % 4 == 3) c.leader_override = NodeId{static_cast<std::uint32_t>(1 + rng() % c.node_count)};
    const std::int64_t kill_at = d + 1 + static_cast<std::int64_t>(rng() % (d - 2));
    c.faults = {ParseFault("kill_leader@" + std::to_string(kill_at))};
    const auto out = RunScenario(c);

    const CycleBeliefs* after = nullptr;
    for (const auto& b : out.report.beliefs) {
      if (b.cycle == 2) after = &b;
    }
    std::optional<NodeId> max_alive;
    std::vector<NodeId> leaders;
    bool agree = true;
    if (after) {
      for (const auto& [id, b] : after->nodes) {
        if (!b.alive) continue;
        max_alive = id;
        if (b.is_leader) leaders.push_back(id);
      }
    }
    NodeId want = max_alive.value_or(NodeId{0});
    if (c.leader_override && after && after->nodes.at(*c.leader_override).alive) want = *c.leader_override;
    if (after) {
      for (const auto& [id, b] : after->nodes) {
        if (b.alive && b.known_leader != want) agree = false;
      }
    }
    const bool ok = after && out.report.killed.size() == 1 && leaders.size() == 1 && leaders[0] == want && agree;
    if (!ok) {
      ++bad;
      if (first_bad.empty()) {
        first_bad = " first_failure=seed:" + std::to_string(c.net.seed) + ",nodes:" + std::to_string(c.node_count) +
                    ",leaders:" + std::to_string(leaders.size());
      }
    }
  }
  return {bad == 0, "scenarios=100 violations=" + std::to_string(bad) + first_bad};
}

Verdict NoLossUnderFaults() {
  std::mt19937_64 rng(777);
  int bad = 0;
  std::uint64_t committed = 0;
  std::string first_bad;
  for (int s = 0; s < 30; ++s) {
    ScenarioConfig c;
    c.node_count = 3 + s % 4;
    c.cycles_to_run = 10;
    c.net.seed = c.visitors.seed = 5000 + s;
    c.visitors.visitor_count = 40;
    c.visitors.double_read_rate = 0.05;
    const std::int64_t d = c.cycle.cycle_duration_ms;
    const double loss = static_cast<double>(rng() % 301) / 1000.0;
    char loss_text[32];
    std::snprintf(loss_text, sizeof(loss_text), "%.3f", loss);
    c.faults = {ParseFault(std::string("set_loss:") + loss_text + "@0"),
                ParseFault("kill_leader@" + std::to_string(d + 1 + static_cast<std::int64_t>(rng() % (d - 2)))),
                ParseFault("set_loss:0@" + std::to_string(6 * d))};
    const auto out = RunScenario(c);
    const auto& rec = out.report.reconciliation;
    committed += rec.committed;
    if (!rec.ok || rec.pending != 0 || rec.committed != rec.generated) {
      ++bad;
      if (first_bad.empty()) first_bad = " first_failure=seed:" + std::to_string(c.net.seed) + " " + rec.detail;
    }
  }
  return {bad == 0, "seeds=30 readings_committed=" + std::to_string(committed) + " failures=" +
                        std::to_string(bad) + first_bad};
}

Verdict MinimumParticipation() {
  ScenarioConfig single;
  single.node_count = 1;
  single.cycles_to_run = 3;
  single.fixture = "table1";
  const auto a = RunScenario(single);

  ScenarioConfig pair;
  pair.node_count = 2;
  pair.cycles_to_run = 3;
  pair.fixture = "table1";
  pair.fixture_node = NodeId{1};
  pair.faults = {ParseFault("partition:1:" + std::to_string(pair.run_duration_ms()) + "@0")};
  const auto b = RunScenario(pair);

  auto reelected_after_abort = [](const MetricsReport& r) {
    bool aborted = false;
    for (const auto& line : r.events) {
      if (line.find(" ABORT ") != std::string::npos) aborted = true;
      if (aborted && line.find(" ELECT ") != std::string::npos) return true;
    }
    return false;
  };
  auto abort_sent = [](const MetricsReport& r) {
    for (const auto& line : r.events) {
      if (line.find("SEND CYCLE_ABORT") != std::string::npos) return true;
    }
    return false;
  };
  const bool pass = a.report.commits.empty() && b.report.commits.empty() && a.store->results().empty() &&
                    b.store->results().empty() && !a.report.aborts.empty() && !b.report.aborts.empty() &&
                    abort_sent(b.report) && reelected_after_abort(a.report) && reelected_after_abort(b.report);
  return {pass, "single: aborts=" + std::to_string(a.report.aborts.size()) +
                    " commits=" + std::to_string(a.report.commits.size()) +
                    "; partitioned pair: aborts=" + std::to_string(b.report.aborts.size()) +
                    " commits=" + std::to_string(b.report.commits.size())};
}

Verdict WireFormat() {
  std::mt19937_64 rng(31337);
  int mismatches = 0;
  for (int i = 0; i < 10000; ++i) {
    Message m;
    m.kind = static_cast<MessageKind>(1 + rng() % 8);
    m.sender = NodeId{static_cast<std::uint32_t>(rng())};
    m.cycle_id = static_cast<std::uint32_t>(rng());
    m.payload.resize(i % 100 == 0 ? rng() % (kMaxPayload + 1) : rng() % 128);
    for (auto& ch : m.payload) ch = static_cast<char>(rng());
    const auto frame = EncodeMessage(m);
    // Independent header assembly.
    std::vector<std::uint8_t> header{1, static_cast<std::uint8_t>(m.kind)};
    for (std::uint32_t v : {m.sender.value, m.cycle_id}) {
      for (int shift = 24; shift >= 0; shift -= 8) header.push_back(static_cast<std::uint8_t>(v >> shift));
    }
    header.push_back(static_cast<std::uint8_t>(m.payload.size() >> 8));
    header.push_back(static_cast<std::uint8_t>(m.payload.size() & 0xFF));
    if (!std::equal(header.begin(), header.end(), frame.begin()) || frame.size() != 12 + m.payload.size() ||
        DecodeMessage(frame) != m) {
      ++mismatches;
    }
  }
  Message ping;
  ping.kind = MessageKind::kPing;
  ping.sender = NodeId{5};
  const bool ping_ok = EncodeMessage(ping) == std::vector<std::uint8_t>{1, 1, 0, 0, 0, 5, 0, 0, 0, 0, 0, 0};
  const std::vector<std::uint8_t> hand{1, 7, 0, 0, 1, 0, 0, 0, 0, 9, 0, 2, 'o', 'k'};
  const auto decoded = DecodeMessage(hand);
  const bool hand_ok = decoded.kind == MessageKind::kCycleSuccess && decoded.sender == NodeId{256} &&
                       decoded.cycle_id == 9 && decoded.payload == "ok";
  bool limits_ok = false;
  try {
    Message big;
    big.payload.assign(9000, 'x');
    EncodeMessage(big);
  } catch (const Error& e) {
    limits_ok = e.code() == ErrorCode::kPayloadTooLarge;
  }
  return {mismatches == 0 && ping_ok && hand_ok && limits_ok,
          "roundtrips=10000 mismatches=" + std::to_string(mismatches) + " ping_frame=" + (ping_ok ? "ok" : "bad") +
              " hand_frame=" + (hand_ok ? "ok" : "bad")};
}

std::string ReadAll(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict Determinism() {
  ScenarioConfig c;
  c.node_count = 5;
  c.cycles_to_run = 5;
  c.net.seed = c.visitors.seed = 123;
  c.net.loss_rate = 0.15;
  c.visitors.visitor_count = 40;
  c.faults = {ParseFault("kill_leader@3100"), ParseFault("set_loss:0@7000")};
  const auto root = std::filesystem::temp_directory_path() / ("crowdmw_accept_" + std::to_string(::getpid()));
  std::vector<std::string> blobs[2];
  for (int run = 0; run < 2; ++run) {
    const auto out = RunScenario(c);
    const auto dir = root / std::to_string(run);
    EmitReport(out.report, dir);
    for (const char* f : {"metrics.csv", "summary.csv", "events.log"}) blobs[run].push_back(ReadAll(dir / f));
    blobs[run].push_back(out.store->dump());
  }
  std::filesystem::remove_all(root);
  const bool pass = blobs[0] == blobs[1] && !blobs[0][2].empty() && !blobs[0][3].empty();
  return {pass, "events_bytes=" + std::to_string(blobs[0][2].size()) +
                    " store_bytes=" + std::to_string(blobs[0][3].size()) + (pass ? " identical" : " differ")};
}

Verdict MetricsShape() {
  ScenarioConfig c;
  c.net.latency_min_ms = 65;
  c.net.latency_max_ms = 65;
  const std::vector<int> counts{0, 500, 1000, 1500};
  const auto csv = SweepLoad(c, counts);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  bool pass = line == "requests,mean_response_ms,rtt_ms,ttfb_ms";
  std::vector<double> means;
  while (std::getline(in, line)) {
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    means.push_back(std::stod(line.substr(a + 1, b - a - 1)));
  }
  pass = pass && means.size() == counts.size();
  std::string shown;
  for (std::size_t i = 0; i < means.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%.1f", i ? "," : "", means[i]);
    shown += buf;
    if (i && means[i] < 0.95 * means[i - 1]) pass = false;
  }
  return {pass, "mean_response_ms=[" + shown + "]"};
}

}  // namespace
}  // namespace crowdmw

int main() {
  using namespace crowdmw;
  struct Criterion {
    const char* name;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria{
      {"1 fixture-visitor", [] { return FixtureCounts(CountMode::kVisitor); }},
      {"2 fixture-room-oracle", [] { return FixtureCounts(CountMode::kRoom); }},
      {"3 distribution-equivalence", DistributionEquivalence},
      {"4 election-safety", ElectionSafety},
      {"5 no-loss-under-faults", NoLossUnderFaults},
      {"6 minimum-participation", MinimumParticipation},
      {"7 wire-format", WireFormat},
      {"8 determinism", Determinism},
      {"9 metrics-shape", MetricsShape},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s #%s (%.2fs): %s\n", v.pass ? "PASS" : "FAIL", c.name, secs, v.detail.c_str());
    std::fflush(stdout);
    failed += v.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}

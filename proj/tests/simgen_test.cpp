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


#include "crowdmw/simgen.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "crowdmw/mapreduce.hpp"
#include "test_util.hpp"

namespace crowdmw {
namespace {

using testing::BruteRoom;
using testing::BruteVisitor;
using testing::ThrowsCode;

VisitorModel Model(std::uint64_t seed, int visitors) {
  VisitorModel m;
  m.seed = seed;
  m.visitor_count = visitors;
  return m;
}

TEST(GenerateStream, EmptyWhenNoVisitors) {
  const auto s = GenerateStream(Model(7, 0), 60'000);
  EXPECT_TRUE(s.readings.empty());
  EXPECT_TRUE(s.ledger.records.empty());
}

TEST(GenerateStream, DeterministicPerSeed) {
  const auto a = GenerateStream(Model(7, 40), 30'000);
  const auto b = GenerateStream(Model(7, 40), 30'000);
  EXPECT_EQ(a.readings, b.readings);
  EXPECT_NE(a.readings, GenerateStream(Model(8, 40), 30'000).readings);
}

TEST(GenerateStream, TagProportionsFollowMix) {
  const auto model = Model(7, 50);
  const auto s = GenerateStream(model, 60'000);
  std::map<std::uint32_t, TagCategory> visitors;
  for (const auto& r : s.readings) visitors[r.badge] = r.tag;
  ASSERT_GT(visitors.size(), 40u);
  std::array<double, 3> share{};
  for (const auto& [badge, tag] : visitors) share[static_cast<int>(tag)] += 1.0 / visitors.size();
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(share[i], model.tag_mix[i], 0.15) << i;

  std::array<double, 3> ledger_share{};
  for (const auto& rec : s.ledger.records) {
    ledger_share[static_cast<int>(rec.tag)] += 1.0 / s.ledger.records.size();
  }
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(ledger_share[i], model.tag_mix[i], 0.15) << i;
}

TEST(GenerateStream, LedgerMatchesStreamAndSequencesAreDense) {
  auto model = Model(3, 60);
  model.double_read_rate = 0.3;
  const auto s = GenerateStream(model, 40'000);
  ASSERT_EQ(s.readings.size(), s.ledger.records.size());
  std::map<int, std::uint64_t> next;
  int dups = 0;
  for (std::size_t i = 0; i < s.readings.size(); ++i) {
    const auto& r = s.readings[i];
    const auto& rec = s.ledger.records[i];
    EXPECT_EQ(rec.sequence, i);
    EXPECT_EQ(rec.tag, r.tag);
    EXPECT_EQ(rec.room, r.room);
    EXPECT_EQ(rec.room_seq, r.seq);
    EXPECT_EQ(r.seq, next[r.room.number]++);
    EXPECT_LT(r.timestamp_ms, 40'000);
    if (i) EXPECT_LE(s.readings[i - 1].timestamp_ms, r.timestamp_ms);
    dups += rec.duplicate;
  }
  EXPECT_GT(dups, 0);
}

TEST(GenerateStream, DoubleReadsStayInsideWindow) {
  auto model = Model(4, 80);
  model.double_read_rate = 0.5;
  const auto s = GenerateStream(model, 60'000);
  for (std::size_t i = 0; i < s.readings.size(); ++i) {
    if (!s.ledger.records[i].duplicate) continue;
    bool paired = false;
    for (std::size_t j = 0; j < i; ++j) {
      const auto& a = s.readings[j];
      const auto& b = s.readings[i];
      paired |= !s.ledger.records[j].duplicate && a.badge == b.badge && a.room == b.room &&
                b.timestamp_ms - a.timestamp_ms <= kDoubleReadWindowMs;
    }
    EXPECT_TRUE(paired) << "duplicate at " << i;
  }
}

TEST(VisitorModel, Validation) {
  auto m = Model(1, 1);
  m.tag_mix = {0.5, 0.5, 0.5};
  EXPECT_TRUE(ThrowsCode([&] { m.Validate(); }, ErrorCode::kConfigError));
  m = Model(1, -1);
  EXPECT_TRUE(ThrowsCode([&] { m.Validate(); }, ErrorCode::kConfigError));
  m = Model(1, 1);
  m.dwell_min_ms = 10;
  EXPECT_TRUE(ThrowsCode([&] { m.Validate(); }, ErrorCode::kConfigError));
  m = Model(1, 1);
  m.double_read_rate = 2;
  EXPECT_TRUE(ThrowsCode([&] { m.Validate(); }, ErrorCode::kConfigError));
}

TEST(ReplayFixture, FixtureCounts) {
  const auto rs = ReplayFixture("table1");
  ASSERT_EQ(rs.size(), 16u);
  EXPECT_EQ(BruteVisitor(rs), (Aggregates{{"man", 10}, {"woman", 21}, {"other", 12}}));
  EXPECT_EQ(BruteRoom(rs), (Aggregates{{"Room1", 2}, {"Room2", 5}, {"Room3", 5}, {"Room4", 4}}));
  std::set<std::uint32_t> badges;
  for (const auto& r : rs) badges.insert(r.badge);
  EXPECT_EQ(badges.size(), 16u);
}

TEST(ReplayFixture, EmptyAndUnknown) {
  EXPECT_TRUE(ReplayFixture("empty").empty());
  EXPECT_TRUE(ThrowsCode([] { ReplayFixture("nope"); }, ErrorCode::kUnknownFixture));
  EXPECT_TRUE(ThrowsCode([] { ReplayFixture("../fixtures/table1"); }, ErrorCode::kUnknownFixture));
  const auto names = ListFixtures();
  EXPECT_NE(std::find(names.begin(), names.end(), "table1"), names.end());
  EXPECT_NE(std::find(names.begin(), names.end(), "empty"), names.end());
}

TEST(SensorField, HandsOutEachReadingUntilAcknowledged) {
  const auto stream = ParseFixtureText(testing::kFixtureText);
  NodeId owner{1};
  SensorField field(stream, 4, [&](int) { return std::optional<NodeId>(owner); });
  auto first = field.collect(NodeId{1}, 10'000);
  EXPECT_EQ(first.readings.size(), 16u);
  // Already handed out: a second collect by the same carrier yields nothing new.
  EXPECT_TRUE(field.collect(NodeId{1}, 10'000).readings.empty());
  EXPECT_EQ(field.backlog().size(), 16u);
  for (int room = 1; room <= 4; ++room) field.acknowledge(room, 2);
  EXPECT_EQ(field.backlog().size(), 16u - 8u);
  // Re-homing hands the unacknowledged backlog to the new carrier.
  owner = NodeId{2};
  EXPECT_TRUE(field.collect(NodeId{1}, 10'000).readings.empty());
  const auto moved = field.collect(NodeId{2}, 10'000);
  EXPECT_EQ(moved.readings.size(), 8u);
  EXPECT_FALSE(moved.context.empty());
}

TEST(SensorField, ReleasesByTimestamp) {
  const auto stream = ParseFixtureText(testing::kFixtureText);  // 100 ms apart
  SensorField field(stream, 4, [](int) { return std::optional<NodeId>(NodeId{1}); });
  EXPECT_EQ(field.collect(NodeId{1}, 450).readings.size(), 5u);
  EXPECT_EQ(field.collect(NodeId{1}, 10'000).readings.size(), 11u);
}

}  // namespace
}  // namespace crowdmw

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


#include "crowdmw/mapreduce.hpp"

#include <gtest/gtest.h>

#include <random>

#include "crowdmw/simgen.hpp"
#include "test_util.hpp"

namespace crowdmw {
namespace {

using testing::BruteRoom;
using testing::BruteVisitor;
using testing::ThrowsCode;

SensorReading Reading(TagCategory tag, int room) {
  SensorReading r;
  r.tag = tag;
  r.room = MakeRoom(room);
  return r;
}

std::vector<KeyValuePair> MapAll(const std::vector<SensorReading>& rs, CountMode mode) {
  std::vector<KeyValuePair> out;
  for (const auto& r : rs) out.push_back(MapReading(r, mode));
  return out;
}

std::vector<NodeId> Ids(std::initializer_list<std::uint32_t> ids) {
  std::vector<NodeId> out;
  for (auto id : ids) out.push_back(NodeId{id});
  return out;
}

TEST(MapReading, Modes) {
  EXPECT_EQ(MapReading(Reading(TagCategory::kMan, 1), CountMode::kVisitor),
            (KeyValuePair{"man", 1}));
  EXPECT_EQ(MapReading(Reading(TagCategory::kWoman, 3), CountMode::kRoom),
            (KeyValuePair{"Room3", 1}));
  EXPECT_EQ(MapReading(Reading(TagCategory::kOther, 4), CountMode::kVisitor),
            (KeyValuePair{"other", 4}));
}

TEST(SortPairs, Examples) {
  EXPECT_EQ(SortPairs({{"woman", 3}, {"man", 1}}),
            (std::vector<KeyValuePair>{{"man", 1}, {"woman", 3}}));
  EXPECT_TRUE(SortPairs({}).empty());
}

TEST(SortPairs, FixtureStream) {
  const auto sorted = SortPairs(ParsePairs(testing::kFixtureText));
  const std::vector<KeyValuePair> expected{
      {"man", 1},   {"man", 2},   {"man", 3},   {"man", 4},   {"other", 2}, {"other", 3},
      {"other", 3}, {"other", 4}, {"woman", 1}, {"woman", 2}, {"woman", 2}, {"woman", 2},
      {"woman", 3}, {"woman", 3}, {"woman", 4}, {"woman", 4}};
  EXPECT_EQ(sorted, expected);
}

TEST(SerializePairs, RoundTrip) {
  const std::vector<KeyValuePair> pairs{{"man", 1}, {"Room4", 12}};
  EXPECT_EQ(SerializePairs(pairs), "man=1,Room4=12");
  EXPECT_EQ(ParsePairs(SerializePairs(pairs)), pairs);
  EXPECT_TRUE(ParsePairs("").empty());
  EXPECT_TRUE(ThrowsCode([] { ParsePairs("man"); }, ErrorCode::kMalformed));
  EXPECT_TRUE(ThrowsCode([] { ParsePairs("man=x"); }, ErrorCode::kMalformed));
}

std::vector<std::size_t> Sizes(const std::vector<Segment>& segs) {
  std::vector<std::size_t> out;
  for (const auto& s : segs) out.push_back(s.pairs.size());
  return out;
}

TEST(Partition, SizesAndAssignees) {
  const auto sorted = SortPairs(ParsePairs(testing::kFixtureText));
  const auto clients = Ids({9, 2, 5});
  const auto segs = Partition(sorted, clients);
  EXPECT_EQ(Sizes(segs), (std::vector<std::size_t>{6, 5, 5}));
  EXPECT_EQ(segs[0].assignee, NodeId{2});
  EXPECT_EQ(segs[1].assignee, NodeId{5});
  EXPECT_EQ(segs[2].assignee, NodeId{9});

  const std::vector<KeyValuePair> three{{"man", 1}, {"man", 2}, {"man", 3}};
  const auto one = Ids({7});
  const auto single = Partition(three, one);
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0].assignee, NodeId{7});
  EXPECT_EQ(single[0].pairs.size(), 3u);

  const std::vector<KeyValuePair> two{{"man", 1}, {"man", 2}};
  EXPECT_EQ(Sizes(Partition(two, Ids({1, 2, 3}))), (std::vector<std::size_t>{1, 1, 0}));
}

TEST(Partition, RejectsBadClientSets) {
  const std::vector<KeyValuePair> two{{"man", 1}, {"man", 2}};
  EXPECT_TRUE(ThrowsCode([&] { Partition(two, {}); }, ErrorCode::kNoClients));
  EXPECT_TRUE(ThrowsCode([&] { Partition(two, Ids({1, 1})); }, ErrorCode::kInvalidArgument));
}

TEST(Partition, ConcatenationPreservesInput) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<KeyValuePair> pairs;
    const int n = static_cast<int>(rng() % 40);
    for (int i = 0; i < n; ++i) pairs.push_back({"man", rng() % 4 + 1});
    pairs = SortPairs(pairs);
    std::vector<NodeId> clients;
    const int k = static_cast<int>(rng() % 8) + 1;
    for (int i = 0; i < k; ++i) clients.push_back(NodeId{static_cast<std::uint32_t>(i * 3 + 1)});
    std::vector<KeyValuePair> joined;
    std::size_t lo = pairs.size(), hi = 0;
    for (const auto& s : Partition(pairs, clients)) {
      joined.insert(joined.end(), s.pairs.begin(), s.pairs.end());
      lo = std::min(lo, s.pairs.size());
      hi = std::max(hi, s.pairs.size());
      EXPECT_EQ(s.checksum, SegmentChecksum(s.pairs));
    }
    EXPECT_EQ(joined, pairs);
    EXPECT_LE(hi - std::min(lo, hi), 1u);
  }
}

Segment MakeSegment(std::vector<KeyValuePair> pairs) {
  Segment s;
  s.assignee = NodeId{1};
  s.pairs = std::move(pairs);
  s.checksum = SegmentChecksum(s.pairs);
  return s;
}

TEST(ReduceSegment, Examples) {
  auto p = ReduceSegment(MakeSegment({{"man", 1}, {"man", 2}, {"man", 3}}), CountMode::kVisitor);
  EXPECT_EQ(p.aggregates, (Aggregates{{"man", 6}}));
  EXPECT_EQ(p.input_pair_count, 3u);

  p = ReduceSegment(MakeSegment({{"Room1", 1}, {"Room1", 1}}), CountMode::kRoom);
  EXPECT_EQ(p.aggregates, (Aggregates{{"Room1", 2}}));
  EXPECT_EQ(p.input_pair_count, 2u);

  p = ReduceSegment(MakeSegment({}), CountMode::kVisitor);
  EXPECT_TRUE(p.aggregates.empty());
  EXPECT_EQ(p.input_pair_count, 0u);
}

TEST(ReduceSegment, ChecksumAndModeChecks) {
  auto seg = MakeSegment({{"man", 1}});
  seg.pairs[0].value = 2;
  EXPECT_TRUE(ThrowsCode([&] { ReduceSegment(seg, CountMode::kVisitor); },
                         ErrorCode::kChecksumMismatch));
  EXPECT_TRUE(ThrowsCode([] { ReduceSegment(MakeSegment({{"man", 1}}), CountMode::kRoom); },
                         ErrorCode::kModeMismatch));
  EXPECT_TRUE(ThrowsCode(
      [] { ReduceSerializedSegment("man=1", 0, CountMode::kVisitor, NodeId{1}); },
      ErrorCode::kChecksumMismatch));
}

PartialResult Partial(Aggregates a, CountMode mode = CountMode::kVisitor) {
  PartialResult p;
  p.mode = mode;
  p.aggregates = std::move(a);
  return p;
}

TEST(MergePartials, Examples) {
  const std::vector<PartialResult> visitor{Partial({{"man", 6}}),
                                           Partial({{"man", 4}, {"woman", 21}, {"other", 12}})};
  EXPECT_EQ(MergePartials(visitor, CountMode::kVisitor).aggregates,
            (Aggregates{{"man", 10}, {"woman", 21}, {"other", 12}}));

  const std::vector<PartialResult> room{Partial({}, CountMode::kRoom),
                                        Partial({{"Room2", 5}}, CountMode::kRoom)};
  EXPECT_EQ(MergePartials(room, CountMode::kRoom).aggregates, (Aggregates{{"Room2", 5}}));

  const std::vector<PartialResult> mixed{Partial({}, CountMode::kRoom)};
  EXPECT_TRUE(ThrowsCode([&] { MergePartials(mixed, CountMode::kVisitor); },
                         ErrorCode::kModeMismatch));
}

TEST(MergePartials, FixtureRoomModeAnySplit) {
  const auto readings = ParseFixtureText(testing::kFixtureText);
  const auto sorted = SortPairs(MapAll(readings, CountMode::kRoom));
  const Aggregates expected{{"Room1", 2}, {"Room2", 5}, {"Room3", 5}, {"Room4", 4}};
  // Every way of cutting 16 pairs into three contiguous segments.
  for (std::size_t a = 0; a <= sorted.size(); ++a) {
    for (std::size_t b = a; b <= sorted.size(); ++b) {
      std::vector<PartialResult> partials;
      const std::size_t cuts[] = {0, a, b, sorted.size()};
      for (int i = 0; i < 3; ++i) {
        partials.push_back(ReduceSegment(
            MakeSegment({sorted.begin() + cuts[i], sorted.begin() + cuts[i + 1]}), CountMode::kRoom));
      }
      EXPECT_EQ(MergePartials(partials, CountMode::kRoom).aggregates, expected);
    }
  }
}

TEST(SequentialOracle, Examples) {
  const auto readings = ParseFixtureText(testing::kFixtureText);
  EXPECT_EQ(SequentialOracle(readings, CountMode::kVisitor),
            (Aggregates{{"man", 10}, {"woman", 21}, {"other", 12}}));
  EXPECT_TRUE(SequentialOracle({}, CountMode::kRoom).empty());
  const std::vector<SensorReading> one{Reading(TagCategory::kMan, 1)};
  EXPECT_EQ(SequentialOracle(one, CountMode::kVisitor), (Aggregates{{"man", 1}}));
}

TEST(SequentialOracle, MatchesBruteForceAndPipeline) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<SensorReading> rs;
    const int n = static_cast<int>(rng() % 300);
    for (int i = 0; i < n; ++i) {
      rs.push_back(Reading(kAllTags[rng() % 3], static_cast<int>(rng() % 4) + 1));
    }
    EXPECT_EQ(SequentialOracle(rs, CountMode::kVisitor), BruteVisitor(rs));
    EXPECT_EQ(SequentialOracle(rs, CountMode::kRoom), BruteRoom(rs));
    for (auto mode : {CountMode::kVisitor, CountMode::kRoom}) {
      const auto sorted = SortPairs(MapAll(rs, mode));
      const auto one = std::vector<NodeId>{NodeId{1}};
      std::vector<PartialResult> partials;
      for (const auto& s : Partition(sorted, one)) partials.push_back(ReduceSegment(s, mode));
      EXPECT_EQ(MergePartials(partials, mode).aggregates, SequentialOracle(rs, mode));
    }
  }
}

TEST(ToRoomPairs, DerivesRoomPairsFromVisitorPairs) {
  const auto readings = ParseFixtureText(testing::kFixtureText);
  EXPECT_EQ(ToRoomPairs(SortPairs(MapAll(readings, CountMode::kVisitor))),
            SortPairs(MapAll(readings, CountMode::kRoom)));
}

TEST(MakeCycleResult, TypedMaps) {
  const auto r = MakeCycleResult(4, {{"man", 10}}, {{"Room2", 5}}, 16);
  EXPECT_EQ(r.cycle_id, 4u);
  EXPECT_EQ(r.visitor_aggregates.at(TagCategory::kMan), 10u);
  EXPECT_EQ(r.room_aggregates.at(RoomId{2}), 5u);
  EXPECT_EQ(r.total_readings, 16u);
}

}  // namespace
}  // namespace crowdmw

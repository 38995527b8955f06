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

// Map / sort / partition / reduce / merge over RFID readings, in the two
// counting modes, plus a single-pass sequential oracle for validation.
//
// VISITOR mode maps a reading to (tag, room number) and reduces by summing
// the values per tag. ROOM mode maps to ("RoomN", 1) and reduces to the
// number of occurrences per room.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crowdmw/domain.hpp"

namespace crowdmw {

using Aggregates = std::map<std::string, std::uint64_t>;

struct Segment {
  NodeId assignee;
  std::vector<KeyValuePair> pairs;
  std::size_t segment_index = 0;
  std::uint64_t checksum = 0;
};

struct PartialResult {
  NodeId assignee;
  CountMode mode = CountMode::kVisitor;
  Aggregates aggregates;
  std::uint64_t input_pair_count = 0;

  friend bool operator==(const PartialResult&, const PartialResult&) = default;
};

struct MergedResult {
  Aggregates aggregates;
  std::uint64_t input_pair_count = 0;
};

struct TagLess {
  bool operator()(TagCategory a, TagCategory b) const { return CompareTags(a, b) < 0; }
};

struct CycleResult {
  std::uint64_t cycle_id = 0;
  std::map<TagCategory, std::uint64_t, TagLess> visitor_aggregates;
  std::map<RoomId, std::uint64_t> room_aggregates;
  std::uint64_t total_readings = 0;

  friend bool operator==(const CycleResult&, const CycleResult&) = default;
};

KeyValuePair MapReading(const SensorReading& reading, CountMode mode);

// Stable sort under PairOrder.
std::vector<KeyValuePair> SortPairs(std::vector<KeyValuePair> pairs);

// Canonical text form: "key=value" entries joined by ','. Empty list is "".
std::string SerializePairs(std::span<const KeyValuePair> pairs);
// Throws kMalformed.
std::vector<KeyValuePair> ParsePairs(std::string_view text);

std::uint64_t SegmentChecksum(std::span<const KeyValuePair> pairs);

// Contiguous split of `sorted` into one segment per client, in ascending
// node id order. Sizes differ by at most one; the lower ids take the
// remainder. Throws kNoClients / kInvalidArgument (duplicate ids).
std::vector<Segment> Partition(std::span<const KeyValuePair> sorted,
                               std::span<const NodeId> clients);

// Throws kChecksumMismatch if the segment checksum does not verify, and
// kModeMismatch if a key does not belong to `mode`.
PartialResult ReduceSegment(const Segment& segment, CountMode mode,
                            int room_count = kDefaultRoomCount);

// Checks the checksum over the raw received bytes before parsing, so any
// corruption of the text is reported as kChecksumMismatch.
PartialResult ReduceSerializedSegment(std::string_view text, std::uint64_t checksum,
                                      CountMode mode, NodeId assignee,
                                      int room_count = kDefaultRoomCount);

// Pointwise sum. Throws kModeMismatch if any partial has a different mode.
MergedResult MergePartials(std::span<const PartialResult> partials, CountMode mode);

// Single pass over readings with no sorting or distribution.
Aggregates SequentialOracle(std::span<const SensorReading> readings, CountMode mode);

// Re-keys VISITOR pairs (tag, room) to sorted ROOM pairs ("RoomN", 1).
std::vector<KeyValuePair> ToRoomPairs(std::span<const KeyValuePair> visitor_pairs,
                                      int room_count = kDefaultRoomCount);

// Folds merged per-mode aggregates into the typed cycle result.
CycleResult MakeCycleResult(std::uint64_t cycle_id, const Aggregates& visitor,
                            const Aggregates& room, std::uint64_t total_readings,
                            int room_count = kDefaultRoomCount);

}  // namespace crowdmw

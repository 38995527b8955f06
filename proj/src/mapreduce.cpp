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

#include <algorithm>
#include <charconv>

#include "crowdmw/checksum.hpp"
#include "crowdmw/error.hpp"

namespace crowdmw {

KeyValuePair MapReading(const SensorReading& reading, CountMode mode) {
  if (mode == CountMode::kVisitor) {
    return {std::string(ToString(reading.tag)),
            static_cast<std::uint64_t>(reading.room.number)};
  }
  return {RoomKey(reading.room), 1};
}

std::vector<KeyValuePair> SortPairs(std::vector<KeyValuePair> pairs) {
  std::stable_sort(pairs.begin(), pairs.end(), PairLess);
  return pairs;
}

std::string SerializePairs(std::span<const KeyValuePair> pairs) {
  std::string out;
  out.reserve(pairs.size() * 8);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i) out.push_back(',');
    out += pairs[i].key;
    out.push_back('=');
    out += std::to_string(pairs[i].value);
  }
  return out;
}

std::vector<KeyValuePair> ParsePairs(std::string_view text) {
  std::vector<KeyValuePair> pairs;
  if (text.empty()) return pairs;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = text.find(',', pos);
    const std::string_view entry =
        text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    const std::size_t eq = entry.find('=');
    if (eq == std::string_view::npos || eq == 0 || eq + 1 == entry.size()) {
      throw Error(ErrorCode::kMalformed, "bad pair '" + std::string(entry) + "'");
    }
    const std::string_view digits = entry.substr(eq + 1);
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc() || ptr != digits.data() + digits.size()) {
      throw Error(ErrorCode::kMalformed, "bad value in '" + std::string(entry) + "'");
    }
    pairs.push_back({std::string(entry.substr(0, eq)), value});
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return pairs;
}

std::uint64_t SegmentChecksum(std::span<const KeyValuePair> pairs) {
  return Crc64(SerializePairs(pairs));
}

std::vector<Segment> Partition(std::span<const KeyValuePair> sorted,
                               std::span<const NodeId> clients) {
  if (clients.empty()) throw Error(ErrorCode::kNoClients, "cannot partition across zero clients");
  std::vector<NodeId> order(clients.begin(), clients.end());
  std::sort(order.begin(), order.end());
  if (std::adjacent_find(order.begin(), order.end()) != order.end()) {
    throw Error(ErrorCode::kInvalidArgument, "duplicate client id in partition");
  }

  const std::size_t n = order.size();
  const std::size_t base = sorted.size() / n;
  const std::size_t extra = sorted.size() % n;
  std::vector<Segment> segments;
  segments.reserve(n);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = base + (i < extra ? 1 : 0);
    Segment seg;
    seg.assignee = order[i];
    seg.segment_index = i;
    seg.pairs.assign(sorted.begin() + offset, sorted.begin() + offset + len);
    seg.checksum = SegmentChecksum(seg.pairs);
    segments.push_back(std::move(seg));
    offset += len;
  }
  return segments;
}

namespace {

PartialResult ReducePairs(std::span<const KeyValuePair> pairs, CountMode mode,
                          NodeId assignee, int room_count) {
  PartialResult out;
  out.assignee = assignee;
  out.mode = mode;
  out.input_pair_count = pairs.size();
  for (const auto& p : pairs) {
    if (!IsValidKey(p.key, mode, room_count)) {
      throw Error(ErrorCode::kModeMismatch,
                  "key '" + p.key + "' is not a " + std::string(ToString(mode)) + " key");
    }
    out.aggregates[p.key] += p.value;
  }
  return out;
}

}  // namespace

PartialResult ReduceSegment(const Segment& segment, CountMode mode, int room_count) {
  if (SegmentChecksum(segment.pairs) != segment.checksum) {
    throw Error(ErrorCode::kChecksumMismatch,
                "segment " + std::to_string(segment.segment_index));
  }
  return ReducePairs(segment.pairs, mode, segment.assignee, room_count);
}

PartialResult ReduceSerializedSegment(std::string_view text, std::uint64_t checksum,
                                      CountMode mode, NodeId assignee, int room_count) {
  if (Crc64(text) != checksum) {
    throw Error(ErrorCode::kChecksumMismatch, "serialized segment");
  }
  return ReducePairs(ParsePairs(text), mode, assignee, room_count);
}

MergedResult MergePartials(std::span<const PartialResult> partials, CountMode mode) {
  MergedResult merged;
  for (const auto& partial : partials) {
    if (partial.mode != mode) {
      throw Error(ErrorCode::kModeMismatch, "partial from node " +
                                                std::to_string(partial.assignee.value) +
                                                " has mode " + std::string(ToString(partial.mode)));
    }
    for (const auto& [key, value] : partial.aggregates) merged.aggregates[key] += value;
    merged.input_pair_count += partial.input_pair_count;
  }
  return merged;
}

Aggregates SequentialOracle(std::span<const SensorReading> readings, CountMode mode) {
  Aggregates out;
  for (const auto& r : readings) {
    if (mode == CountMode::kVisitor) {
      out[std::string(ToString(r.tag))] += static_cast<std::uint64_t>(r.room.number);
    } else {
      out[RoomKey(r.room)] += 1;
    }
  }
  return out;
}

std::vector<KeyValuePair> ToRoomPairs(std::span<const KeyValuePair> visitor_pairs,
                                      int room_count) {
  std::vector<KeyValuePair> out;
  out.reserve(visitor_pairs.size());
  for (const auto& p : visitor_pairs) {
    out.push_back({RoomKey(MakeRoom(static_cast<int>(p.value), room_count)), 1});
  }
  return SortPairs(std::move(out));
}

CycleResult MakeCycleResult(std::uint64_t cycle_id, const Aggregates& visitor,
                            const Aggregates& room, std::uint64_t total_readings,
                            int room_count) {
  CycleResult result;
  result.cycle_id = cycle_id;
  result.total_readings = total_readings;
  for (const auto& [key, value] : visitor) result.visitor_aggregates[ParseTag(key)] = value;
  for (const auto& [key, value] : room) result.room_aggregates[ParseRoomKey(key, room_count)] = value;
  return result;
}

}  // namespace crowdmw

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

// Value types shared by every layer of the middleware: visitor tag
// categories, rooms, RFID readings, key/value pairs and node identities.

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace crowdmw {

enum class TagCategory : std::uint8_t { kMan, kWoman, kOther };

inline constexpr TagCategory kAllTags[] = {TagCategory::kMan, TagCategory::kWoman,
                                           TagCategory::kOther};

// Lowercase canonical form: "man", "woman", "other".
std::string_view ToString(TagCategory tag);

// Case-insensitive. Throws Error(kUnknownTag) for anything else.
TagCategory ParseTag(std::string_view token);

// Tags order lexicographically by canonical string: man < other < woman.
std::strong_ordering CompareTags(TagCategory a, TagCategory b);

enum class CountMode : std::uint8_t { kVisitor, kRoom };

std::string_view ToString(CountMode mode);
CountMode ParseCountMode(std::string_view token);

inline constexpr int kDefaultRoomCount = 4;

struct RoomId {
  int number = 1;

  friend auto operator<=>(const RoomId&, const RoomId&) = default;
};

// "Room" + decimal number, no padding.
std::string RoomKey(RoomId room);

// Throws kInvalidArgument unless 1 <= number <= room_count.
RoomId MakeRoom(int number, int room_count = kDefaultRoomCount);

struct NodeId {
  std::uint32_t value = 0;

  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

// One RFID detection. `seq` is the position of the reading in its room
// doorway's sequence and, together with the room, identifies it
// cluster-wide. `badge` is an anonymous per-visit badge instance used only
// to suppress double reads from the two readers of one doorway.
struct SensorReading {
  TagCategory tag = TagCategory::kMan;
  RoomId room;
  std::int64_t timestamp_ms = 0;
  std::uint32_t reader_id = 0;
  std::uint64_t seq = 0;
  std::uint32_t badge = 0;

  friend bool operator==(const SensorReading&, const SensorReading&) = default;
};

struct KeyValuePair {
  std::string key;
  std::uint64_t value = 0;

  friend bool operator==(const KeyValuePair&, const KeyValuePair&) = default;
};

// Total order: key bytes lexicographically, then value ascending.
std::strong_ordering PairOrder(const KeyValuePair& a, const KeyValuePair& b);

inline bool PairLess(const KeyValuePair& a, const KeyValuePair& b) {
  return PairOrder(a, b) < 0;
}

// True when `key` is a canonical tag string (VISITOR) or a valid "RoomN"
// (ROOM).
bool IsValidKey(std::string_view key, CountMode mode,
                int room_count = kDefaultRoomCount);

// Inverse of RoomKey; throws kInvalidArgument on anything else.
RoomId ParseRoomKey(std::string_view key, int room_count = kDefaultRoomCount);

}  // namespace crowdmw

template <>
struct std::hash<crowdmw::NodeId> {
  std::size_t operator()(const crowdmw::NodeId& id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value);
  }
};

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

#include "crowdmw/domain.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "crowdmw/error.hpp"

namespace crowdmw {

namespace {

std::string Lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view ToString(TagCategory tag) {
  switch (tag) {
    case TagCategory::kMan: return "man";
    case TagCategory::kWoman: return "woman";
    case TagCategory::kOther: return "other";
  }
  return "other";
}

TagCategory ParseTag(std::string_view token) {
  const std::string lower = Lower(token);
  for (TagCategory tag : kAllTags) {
    if (lower == ToString(tag)) return tag;
  }
  throw Error(ErrorCode::kUnknownTag, "'" + std::string(token) + "'");
}

std::strong_ordering CompareTags(TagCategory a, TagCategory b) {
  return ToString(a).compare(ToString(b)) <=> 0;
}

std::string_view ToString(CountMode mode) {
  return mode == CountMode::kVisitor ? "visitor" : "room";
}

CountMode ParseCountMode(std::string_view token) {
  const std::string lower = Lower(token);
  if (lower == "visitor") return CountMode::kVisitor;
  if (lower == "room") return CountMode::kRoom;
  throw Error(ErrorCode::kInvalidArgument, "unknown count mode '" + std::string(token) + "'");
}

std::string RoomKey(RoomId room) { return "Room" + std::to_string(room.number); }

RoomId MakeRoom(int number, int room_count) {
  if (number < 1 || number > room_count) {
    throw Error(ErrorCode::kInvalidArgument,
                "room " + std::to_string(number) + " outside 1.." + std::to_string(room_count));
  }
  return RoomId{number};
}

std::strong_ordering PairOrder(const KeyValuePair& a, const KeyValuePair& b) {
  if (auto c = a.key.compare(b.key) <=> 0; c != 0) return c;
  return a.value <=> b.value;
}

RoomId ParseRoomKey(std::string_view key, int room_count) {
  constexpr std::string_view kPrefix = "Room";
  if (key.size() <= kPrefix.size() || key.substr(0, kPrefix.size()) != kPrefix) {
    throw Error(ErrorCode::kInvalidArgument, "not a room key: '" + std::string(key) + "'");
  }
  const std::string_view digits = key.substr(kPrefix.size());
  // No sign, no leading zeros: the key must round-trip through RoomKey.
  if (digits.front() == '0') {
    throw Error(ErrorCode::kInvalidArgument, "not a room key: '" + std::string(key) + "'");
  }
  int number = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), number);
  if (ec != std::errc() || ptr != digits.data() + digits.size()) {
    throw Error(ErrorCode::kInvalidArgument, "not a room key: '" + std::string(key) + "'");
  }
  return MakeRoom(number, room_count);
}

bool IsValidKey(std::string_view key, CountMode mode, int room_count) {
  try {
    if (mode == CountMode::kVisitor) {
      return ToString(ParseTag(key)) == key;
    }
    ParseRoomKey(key, room_count);
    return true;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace crowdmw

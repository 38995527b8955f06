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

// Versioned datagram envelope. Layout, big-endian:
//
//   offset  size  field
//        0     1  version (1)
//        1     1  kind
//        2     4  sender node id
//        6     4  cycle id
//       10     2  payload length
//       12     n  payload
//
// A frame never exceeds 8192 bytes, so the payload is at most 8180 bytes.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crowdmw/domain.hpp"

namespace crowdmw {

inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::size_t kHeaderSize = 12;
inline constexpr std::size_t kMaxDatagram = 8192;
inline constexpr std::size_t kMaxPayload = kMaxDatagram - kHeaderSize;

enum class MessageKind : std::uint8_t {
  kPing = 1,
  kPong = 2,
  kRegisterAck = 3,
  kDataSubmit = 4,
  kSegmentAssign = 5,
  kReduceResult = 6,
  kCycleSuccess = 7,
  kCycleAbort = 8,
};

std::string_view ToString(MessageKind kind);

struct Message {
  std::uint8_t version = kProtocolVersion;
  MessageKind kind = MessageKind::kPing;
  NodeId sender;
  std::uint32_t cycle_id = 0;
  // Raw payload bytes; every payload this middleware sends is UTF-8 text.
  std::string payload;

  friend bool operator==(const Message&, const Message&) = default;
};

// Throws kPayloadTooLarge.
std::vector<std::uint8_t> EncodeMessage(const Message& message);

// Throws kMalformed on a short frame, bad version, unknown kind, or a
// payload length that disagrees with the frame size.
Message DecodeMessage(std::span<const std::uint8_t> frame);

}  // namespace crowdmw

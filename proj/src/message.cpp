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

#include "crowdmw/message.hpp"

#include "crowdmw/error.hpp"

namespace crowdmw {

namespace {

void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t GetU32(std::span<const std::uint8_t> in, std::size_t at) {
  return (std::uint32_t{in[at]} << 24) | (std::uint32_t{in[at + 1]} << 16) |
         (std::uint32_t{in[at + 2]} << 8) | std::uint32_t{in[at + 3]};
}

bool IsKnownKind(std::uint8_t kind) { return kind >= 1 && kind <= 8; }

}  // namespace

std::string_view ToString(MessageKind kind) {
  switch (kind) {
    case MessageKind::kPing: return "PING";
    case MessageKind::kPong: return "PONG";
    case MessageKind::kRegisterAck: return "REGISTER_ACK";
    case MessageKind::kDataSubmit: return "DATA_SUBMIT";
    case MessageKind::kSegmentAssign: return "SEGMENT_ASSIGN";
    case MessageKind::kReduceResult: return "REDUCE_RESULT";
    case MessageKind::kCycleSuccess: return "CYCLE_SUCCESS";
    case MessageKind::kCycleAbort: return "CYCLE_ABORT";
  }
  return "UNKNOWN";
}

std::vector<std::uint8_t> EncodeMessage(const Message& message) {
  if (message.payload.size() > kMaxPayload) {
    throw Error(ErrorCode::kPayloadTooLarge,
                std::to_string(message.payload.size()) + " bytes exceeds " +
                    std::to_string(kMaxPayload));
  }
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + message.payload.size());
  out.push_back(message.version);
  out.push_back(static_cast<std::uint8_t>(message.kind));
  PutU32(out, message.sender.value);
  PutU32(out, message.cycle_id);
  const auto len = static_cast<std::uint16_t>(message.payload.size());
  out.push_back(static_cast<std::uint8_t>(len >> 8));
  out.push_back(static_cast<std::uint8_t>(len));
  out.insert(out.end(), message.payload.begin(), message.payload.end());
  return out;
}

Message DecodeMessage(std::span<const std::uint8_t> frame) {
  if (frame.size() < kHeaderSize) {
    throw Error(ErrorCode::kMalformed, "short frame of " + std::to_string(frame.size()) + " bytes");
  }
  if (frame.size() > kMaxDatagram) {
    throw Error(ErrorCode::kMalformed, "oversized frame");
  }
  if (frame[0] != kProtocolVersion) {
    throw Error(ErrorCode::kMalformed, "unsupported version " + std::to_string(frame[0]));
  }
  if (!IsKnownKind(frame[1])) {
    throw Error(ErrorCode::kMalformed, "unknown kind " + std::to_string(frame[1]));
  }
  const std::size_t len = (std::size_t{frame[10]} << 8) | frame[11];
  if (kHeaderSize + len != frame.size()) {
    throw Error(ErrorCode::kMalformed, "payload length " + std::to_string(len) +
                                           " disagrees with frame size " +
                                           std::to_string(frame.size()));
  }
  Message m;
  m.version = frame[0];
  m.kind = static_cast<MessageKind>(frame[1]);
  m.sender = NodeId{GetU32(frame, 2)};
  m.cycle_id = GetU32(frame, 6);
  m.payload.assign(reinterpret_cast<const char*>(frame.data() + kHeaderSize), len);
  return m;
}

}  // namespace crowdmw

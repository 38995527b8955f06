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

// Datagram endpoints. Two interchangeable backends implement Endpoint:
// SimNetwork (deterministic, virtual clock) and UdpEndpoint (real sockets).
// Both give fire-and-forget semantics: messages may be dropped or
// reordered, never duplicated.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "crowdmw/message.hpp"

namespace crowdmw {

enum class Backend : std::uint8_t { kSimulated, kUdp };

std::string_view ToString(Backend backend);
Backend ParseBackend(std::string_view token);

struct NetConfig {
  double loss_rate = 0.0;
  std::int64_t latency_min_ms = 40;
  std::int64_t latency_max_ms = 90;
  std::uint64_t seed = 1;
  Backend mode = Backend::kSimulated;
  // Per-datagram receive cost at the destination. Datagrams arriving at a
  // busy endpoint queue behind each other, so response time grows with load.
  double service_ms = 0.05;

  // Throws kConfigError.
  void Validate() const;
};

struct HostPort {
  std::string host;
  std::uint16_t port = 0;
};

// Throws kInvalidArgument unless `address` is "host:port" with a port in
// 1..65535.
HostPort ParseHostPort(std::string_view address);

class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now_us() const = 0;
  std::int64_t now_ms() const { return now_us() / 1000; }
};

struct Datagram {
  std::string from;
  Message message;
};

struct SendReceipt {
  // The transport took the datagram; delivery is not guaranteed.
  bool accepted = true;
};

class Endpoint {
 public:
  virtual ~Endpoint() = default;

  virtual const std::string& address() const = 0;

  // Throws kEndpointClosed, kPayloadTooLarge.
  virtual SendReceipt send(const std::string& dest, const Message& message) = 0;

  // Next delivered datagram, or nullopt once `timeout_ms` elapses.
  // Throws kEndpointClosed.
  virtual std::optional<Datagram> recv(std::int64_t timeout_ms) = 0;

  virtual void close() = 0;
  virtual bool closed() const = 0;
};

}  // namespace crowdmw

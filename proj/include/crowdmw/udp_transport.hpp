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

#include <cstdint>
#include <memory>
#include <mutex>
#include <random>
#include <string>

#include "crowdmw/transport.hpp"

namespace crowdmw {

// Monotonic wall clock measured from construction.
class WallClock final : public Clock {
 public:
  WallClock();
  std::int64_t now_us() const override;

 private:
  std::int64_t origin_us_;
};

// Real UDP socket bound to host:port (IPv4). Loss injection from NetConfig
// is applied on send in software so fault scenarios work on loopback too.
class UdpEndpoint final : public Endpoint {
 public:
  // Throws kIoFailure if the socket cannot be bound.
  UdpEndpoint(const std::string& address, const NetConfig& config);
  ~UdpEndpoint() override;
  UdpEndpoint(const UdpEndpoint&) = delete;
  UdpEndpoint& operator=(const UdpEndpoint&) = delete;

  const std::string& address() const override { return address_; }
  SendReceipt send(const std::string& dest, const Message& message) override;
  std::optional<Datagram> recv(std::int64_t timeout_ms) override;
  void close() override;
  bool closed() const override;

  void set_loss_rate(double rate);

 private:
  std::string address_;
  int fd_ = -1;
  mutable std::mutex mu_;
  double loss_rate_;
  std::mt19937_64 rng_;
};

}  // namespace crowdmw

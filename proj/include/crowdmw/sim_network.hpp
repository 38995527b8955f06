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

// Deterministic in-process network on a virtual clock.
//
// All activity is driven by one EventLoop; nothing runs unless the owner
// advances it, so a fixed seed reproduces the same delivery schedule bit
// for bit. Loss and latency are drawn from one seeded generator in send
// order.

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "crowdmw/transport.hpp"

namespace crowdmw {

class EventLoop final : public Clock {
 public:
  std::int64_t now_us() const override { return now_us_; }

  // Events at equal times run in scheduling order.
  void schedule_at(std::int64_t at_us, std::function<void()> fn);

  std::optional<std::int64_t> next_time() const;

  // Runs the earliest event; false if the queue is empty.
  bool run_next();

  // Runs every event due at or before `t_us`, then sets the clock to `t_us`.
  void run_until(std::int64_t t_us);

  // Moves the clock forward without running anything. Never moves back.
  void advance_to(std::int64_t t_us);

 private:
  struct Event {
    std::int64_t at_us;
    std::uint64_t order;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.at_us != b.at_us ? a.at_us > b.at_us : a.order > b.order;
    }
  };

  std::int64_t now_us_ = 0;
  std::uint64_t next_order_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
};

// One entry per datagram handed to the network.
struct DeliveryRecord {
  std::uint64_t id = 0;
  std::int64_t sent_us = 0;
  std::int64_t delivered_us = -1;  // -1 when dropped
  std::string from;
  std::string to;
  MessageKind kind = MessageKind::kPing;
  std::uint32_t cycle_id = 0;
};

class SimNetwork {
 public:
  using Handler = std::function<void(const Datagram&)>;

  SimNetwork(EventLoop& loop, NetConfig config);
  SimNetwork(const SimNetwork&) = delete;
  SimNetwork& operator=(const SimNetwork&) = delete;

  // Throws kInvalidArgument if the address is malformed or already bound.
  std::unique_ptr<Endpoint> bind(const std::string& address);

  // Push delivery: the handler runs on the loop at delivery time instead
  // of queueing into the endpoint inbox.
  void set_handler(const std::string& address, Handler handler);

  void set_loss_rate(double rate);
  double loss_rate() const { return config_.loss_rate; }

  // Drops every datagram crossing the boundary of `group` until `until_us`.
  void partition(std::set<std::string> group, std::int64_t until_us);

  EventLoop& loop() { return loop_; }
  const std::vector<DeliveryRecord>& records() const { return records_; }

 private:
  class SimEndpoint;
  friend class SimEndpoint;

  struct Port {
    bool open = true;
    std::deque<Datagram> inbox;
    Handler handler;
    std::int64_t busy_until_us = 0;
  };
  struct Partition {
    std::set<std::string> group;
    std::int64_t until_us;
  };

  SendReceipt send(const std::string& from, const std::string& to, const Message& message);
  void arrive(std::uint64_t record, const std::string& to, Datagram datagram);
  void deliver(std::uint64_t record, const std::string& to, Datagram datagram);
  bool partitioned(const std::string& a, const std::string& b) const;
  bool drop_roll();
  std::int64_t latency_roll_us();

  EventLoop& loop_;
  NetConfig config_;
  std::mt19937_64 rng_;
  std::map<std::string, Port> ports_;
  std::vector<Partition> partitions_;
  std::vector<DeliveryRecord> records_;
};

}  // namespace crowdmw

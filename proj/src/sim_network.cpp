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

#include "crowdmw/sim_network.hpp"

#include <algorithm>
#include <cmath>

#include "crowdmw/error.hpp"

namespace crowdmw {

void EventLoop::schedule_at(std::int64_t at_us, std::function<void()> fn) {
  queue_.push(Event{std::max(at_us, now_us_), next_order_++, std::move(fn)});
}

std::optional<std::int64_t> EventLoop::next_time() const {
  if (queue_.empty()) return std::nullopt;
  return queue_.top().at_us;
}

bool EventLoop::run_next() {
  if (queue_.empty()) return false;
  Event ev = queue_.top();
  queue_.pop();
  now_us_ = std::max(now_us_, ev.at_us);
  ev.fn();
  return true;
}

void EventLoop::run_until(std::int64_t t_us) {
  while (!queue_.empty() && queue_.top().at_us <= t_us) run_next();
  advance_to(t_us);
}

void EventLoop::advance_to(std::int64_t t_us) { now_us_ = std::max(now_us_, t_us); }

class SimNetwork::SimEndpoint final : public Endpoint {
 public:
  SimEndpoint(SimNetwork& net, std::string address) : net_(net), address_(std::move(address)) {}
  ~SimEndpoint() override { close(); }

  const std::string& address() const override { return address_; }

  SendReceipt send(const std::string& dest, const Message& message) override {
    if (closed_) throw Error(ErrorCode::kEndpointClosed, address_);
    return net_.send(address_, dest, message);
  }

  std::optional<Datagram> recv(std::int64_t timeout_ms) override {
    if (closed_) throw Error(ErrorCode::kEndpointClosed, address_);
    auto& port = net_.ports_.at(address_);
    const std::int64_t deadline = net_.loop_.now_us() + timeout_ms * 1000;
    while (port.inbox.empty()) {
      auto next = net_.loop_.next_time();
      if (!next || *next > deadline) {
        net_.loop_.advance_to(deadline);
        return std::nullopt;
      }
      net_.loop_.run_next();
    }
    Datagram d = std::move(port.inbox.front());
    port.inbox.pop_front();
    return d;
  }

  void close() override {
    if (closed_) return;
    closed_ = true;
    auto it = net_.ports_.find(address_);
    if (it != net_.ports_.end()) {
      it->second.open = false;
      it->second.inbox.clear();
      it->second.handler = nullptr;
    }
  }

  bool closed() const override { return closed_; }

 private:
  SimNetwork& net_;
  std::string address_;
  bool closed_ = false;
};

SimNetwork::SimNetwork(EventLoop& loop, NetConfig config)
    : loop_(loop), config_(config), rng_(config.seed) {
  config_.Validate();
}

std::unique_ptr<Endpoint> SimNetwork::bind(const std::string& address) {
  ParseHostPort(address);
  auto it = ports_.find(address);
  if (it != ports_.end() && it->second.open) {
    throw Error(ErrorCode::kInvalidArgument, "address already bound: " + address);
  }
  ports_[address] = Port{};
  return std::make_unique<SimEndpoint>(*this, address);
}

void SimNetwork::set_handler(const std::string& address, Handler handler) {
  ports_.at(address).handler = std::move(handler);
}

void SimNetwork::set_loss_rate(double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw Error(ErrorCode::kConfigError, "loss_rate must be in [0,1]");
  config_.loss_rate = rate;
}

void SimNetwork::partition(std::set<std::string> group, std::int64_t until_us) {
  partitions_.push_back(Partition{std::move(group), until_us});
}

bool SimNetwork::partitioned(const std::string& a, const std::string& b) const {
  for (const auto& p : partitions_) {
    if (loop_.now_us() >= p.until_us) continue;
    if (p.group.count(a) != p.group.count(b)) return true;
  }
  return false;
}

bool SimNetwork::drop_roll() {
  // Always consume one draw so the schedule does not shift with the rate.
  const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  return u < config_.loss_rate;
}

std::int64_t SimNetwork::latency_roll_us() {
  const std::uint64_t lo = static_cast<std::uint64_t>(config_.latency_min_ms) * 1000;
  const std::uint64_t span = static_cast<std::uint64_t>(config_.latency_max_ms) * 1000 - lo + 1;
  return static_cast<std::int64_t>(lo + rng_() % span);
}

SendReceipt SimNetwork::send(const std::string& from, const std::string& to,
                             const Message& message) {
  // Encode/decode so simulated traffic goes through the real wire format.
  const auto frame = EncodeMessage(message);

  DeliveryRecord rec;
  rec.id = records_.size();
  rec.sent_us = loop_.now_us();
  rec.from = from;
  rec.to = to;
  rec.kind = message.kind;
  rec.cycle_id = message.cycle_id;
  records_.push_back(rec);

  const bool lost = drop_roll();
  const std::int64_t latency = latency_roll_us();
  if (lost || partitioned(from, to)) return {};

  const std::uint64_t id = rec.id;
  Datagram datagram{from, DecodeMessage(frame)};
  loop_.schedule_at(loop_.now_us() + latency,
                    [this, id, to, d = std::move(datagram)]() mutable { arrive(id, to, std::move(d)); });
  return {};
}

void SimNetwork::arrive(std::uint64_t record, const std::string& to, Datagram datagram) {
  auto it = ports_.find(to);
  if (it == ports_.end() || !it->second.open) return;
  if (config_.service_ms <= 0.0) {
    deliver(record, to, std::move(datagram));
    return;
  }
  auto& port = it->second;
  const auto service_us = static_cast<std::int64_t>(std::llround(config_.service_ms * 1000.0));
  const std::int64_t at = std::max(loop_.now_us(), port.busy_until_us) + service_us;
  port.busy_until_us = at;
  loop_.schedule_at(at, [this, record, to, d = std::move(datagram)]() mutable {
    deliver(record, to, std::move(d));
  });
}

void SimNetwork::deliver(std::uint64_t record, const std::string& to, Datagram datagram) {
  auto it = ports_.find(to);
  if (it == ports_.end() || !it->second.open) return;
  records_[record].delivered_us = loop_.now_us();
  if (it->second.handler) {
    // Copy: the handler may rebind or close ports.
    Handler handler = it->second.handler;
    handler(datagram);
  } else {
    it->second.inbox.push_back(std::move(datagram));
  }
}

}  // namespace crowdmw

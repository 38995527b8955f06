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

// One crowd-monitoring node: an event-driven state machine that collects
// readings, finds the current leader, submits its buffer, reduces the
// segment it is handed and, when it is the leader, runs the cycle.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <stop_token>
#include <string>
#include <vector>

#include "crowdmw/election.hpp"
#include "crowdmw/runtime.hpp"
#include "crowdmw/simgen.hpp"
#include "crowdmw/store.hpp"
#include "crowdmw/transport.hpp"

namespace crowdmw {

struct NodeConfig {
  NodeId id;
  std::string address;
  CycleConfig cycle;
  std::optional<NodeId> leader_override;
  std::vector<CountMode> modes{CountMode::kVisitor, CountMode::kRoom};
  int room_count = kDefaultRoomCount;
  std::uint64_t seed = 1;
  // Extra probe DATA_SUBMITs sent per cycle; used by load sweeps.
  int load_requests = 0;
};

struct MetricSample {
  std::string kind;
  NodeId node;
  std::uint64_t cycle = 0;
  std::int64_t t_us = 0;
  double value = 0.0;
};

// Receives the node's event log and metrics. Methods are called on the
// thread that drives the node.
class NodeObserver {
 public:
  virtual ~NodeObserver() = default;
  virtual void on_log(std::int64_t /*t_us*/, NodeId /*node*/, const std::string& /*line*/) {}
  virtual void on_metric(const MetricSample& /*sample*/) {}
  virtual void on_election(NodeId /*elector*/, NodeId /*elected*/, std::int64_t /*t_us*/) {}
  virtual void on_commit(NodeId /*leader*/, const CycleResult& /*result*/, std::int64_t /*t_us*/) {}
  virtual void on_abort(NodeId /*leader*/, std::uint64_t /*cycle*/, const std::string& /*reason*/) {}
  // A cycle finished with CYCLE_SUCCESS, committed or empty.
  virtual void on_cycle_complete(NodeId /*leader*/, std::uint64_t /*cycle*/, std::int64_t /*t_us*/) {}
};

// "t=<ms> node=<id> <text>"
std::string FormatLogLine(std::int64_t t_us, NodeId node, const std::string& text);

class Node {
 public:
  Node(NodeConfig config, Endpoint& endpoint, const Clock& clock, Store& store,
       ReadingSource& source, NodeObserver* observer = nullptr);

  // Arms the first cycle boundary.
  void start();
  void handle(const Datagram& datagram);
  // Fires every timer that is due.
  void wake();
  std::optional<std::int64_t> next_wakeup_us() const;
  // Crash-stop: closes the endpoint and ignores everything afterwards.
  void kill();

  bool alive() const { return alive_; }
  NodeId id() const { return config_.id; }
  const NodeConfig& config() const { return config_; }
  NodePhase phase() const { return phase_; }
  bool is_leader() const { return is_leader_; }
  std::optional<NodeId> known_leader() const { return leader_; }
  std::uint32_t cycle() const { return cycle_; }
  const ClientBuffer& buffer() const { return buffer_; }

 private:
  enum class Timer : std::uint8_t { kCycleStart, kProbe, kSubmitRetry, kWindow, kResend, kMergeDeadline };

  struct Probe {
    NodeId target;
    std::string address;
    std::uint64_t nonce = 0;
    int attempts = 0;
    std::int64_t sent_us = 0;
  };

  void on_cycle_start();
  void collect();
  void evaluate_leader();
  void become_leader();
  void start_probe(NodeId target, const std::string& address);
  void send_ping();
  void on_probe_timeout();
  void submit();
  void send_submission();

  void on_window();
  void dispatch_segment(std::size_t index);
  void on_resend();
  void on_merge_deadline();
  void finalize();
  void abort_cycle(const std::string& reason);

  void on_pong(const Datagram& d);
  void on_ack(const Datagram& d);
  void on_data_submit(const Datagram& d);
  void on_segment(const Datagram& d);
  void on_reduce_result(const Datagram& d);
  void on_success(const Datagram& d);
  void on_abort_msg(const Datagram& d);

  void apply_watermarks(const std::map<int, std::uint64_t>& watermarks);
  void transition(NodePhase to);
  void send(const std::string& dest, MessageKind kind, std::string payload);
  void send_parts(const std::string& dest, MessageKind kind, std::uint32_t xfer, const std::string& body);
  void log(const std::string& text);
  void metric(const std::string& kind, double value);
  std::int64_t now_us() const { return clock_.now_us(); }
  std::int64_t ms_to_us(std::int64_t ms) const { return ms * 1000; }

  NodeConfig config_;
  Endpoint& endpoint_;
  const Clock& clock_;
  Store& store_;
  Registry registry_;
  ReadingSource& source_;
  NodeObserver* observer_;
  std::mt19937_64 rng_;

  bool alive_ = true;
  bool started_ = false;
  NodePhase phase_ = NodePhase::kRegistering;
  std::map<Timer, std::int64_t> timers_;

  std::uint32_t cycle_ = 0;
  std::int64_t cycle_start_us_ = 0;
  bool is_leader_ = false;
  std::optional<NodeId> leader_;
  std::string leader_address_;
  std::set<NodeId> suspects_;
  std::optional<Probe> probe_;
  bool submit_pending_ = false;
  bool ttfb_recorded_ = false;
  std::uint64_t sent_count_ = 0;
  std::uint64_t received_count_ = 0;

  // Client side.
  ClientBuffer buffer_;
  std::vector<SensorReading> recent_;  // double-read context
  std::uint32_t next_xfer_ = 1;
  std::uint32_t submit_xfer_ = 0;
  std::string submit_body_;
  int submit_attempts_ = 0;
  bool submit_acked_ = false;
  std::int64_t submit_sent_us_ = 0;
  std::map<std::uint32_t, std::int64_t> load_sent_us_;
  std::map<std::uint32_t, std::pair<std::uint32_t, std::string>> reduce_replies_;  // by segment xfer
  Reassembler reassembler_;

  // Leader side.
  std::map<NodeId, Submission> received_;
  std::vector<Datagram> early_;
  std::optional<CycleCoordinator> coord_;
  std::map<std::size_t, std::pair<std::uint32_t, std::string>> dispatched_;  // xfer, body
  int resends_ = 0;
  bool window_closed_ = false;
};

// Drives a node from a real endpoint until `stop` is requested, then
// kills it. Used with the UDP backend.
void RunNode(Node& node, Endpoint& endpoint, const Clock& clock, std::stop_token stop);

}  // namespace crowdmw

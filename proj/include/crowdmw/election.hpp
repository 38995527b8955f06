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

// Registry-arbitrated leader election: every node registers its id and
// address in the shared node table, and the highest live id leads unless
// an operator override names a live node.

#include <cstdint>
#include <optional>
#include <string>

#include "crowdmw/store.hpp"
#include "crowdmw/transport.hpp"

namespace crowdmw {

// Live iff now - last_seen <= window.
bool IsLive(const NodeRecord& record, std::int64_t now_ms, std::int64_t liveness_window_ms);

// Pure function of its arguments. Liveness is judged at
// snapshot.taken_at_ms. Throws kEmptyRegistry when nothing is live and
// kOverrideNotLive when the override names a dead or unknown node.
NodeId ElectLeader(const RegistrySnapshot& snapshot, std::optional<NodeId> override_id,
                   std::int64_t liveness_window_ms);

class Registry {
 public:
  Registry(Store& store, std::int64_t liveness_window_ms)
      : store_(store), liveness_window_ms_(liveness_window_ms) {}

  // Inserts a FOLLOWER record or refreshes address and last_seen of an
  // existing one; the role is preserved. Throws kAddressConflict when a
  // live record holds the id under another address.
  NodeRecord register_node(NodeId id, const std::string& address, std::int64_t now_ms);

  RegistrySnapshot snapshot(std::int64_t now_ms) const { return store_.snapshot_nodes(now_ms); }

  // Marks `leader` LEADER and every other record FOLLOWER in one batch.
  void set_leader(NodeId leader);

  std::optional<NodeId> recorded_leader() const;

  std::int64_t liveness_window_ms() const { return liveness_window_ms_; }

 private:
  Store& store_;
  std::int64_t liveness_window_ms_;
};

enum class Availability : std::uint8_t { kAvailable, kUnavailable };

std::string_view ToString(Availability a);

// PING payloads carry a 64-bit nonce as 16 lowercase hex digits.
std::string EncodeNonce(std::uint64_t nonce);

Message MakePing(NodeId self, std::uint32_t cycle_id, std::uint64_t nonce);
// The answer to `ping`: same nonce, sent by `self`.
Message MakePong(const Message& ping, NodeId self);
bool IsPongFor(const Message& reply, std::uint64_t nonce);

// Blocking probe: up to `retries` PINGs, each waiting `timeout_ms` for a
// PONG carrying the same nonce. Other datagrams received meanwhile are
// discarded. Unavailability is a verdict, not an error.
Availability CheckServerAvailable(Endpoint& endpoint, const Clock& clock,
                                  const std::string& leader_address, std::int64_t timeout_ms,
                                  NodeId self, std::uint64_t nonce, int retries = 2);

}  // namespace crowdmw

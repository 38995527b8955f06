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

#include "crowdmw/election.hpp"

#include <charconv>
#include <cstdio>

#include "crowdmw/error.hpp"

namespace crowdmw {

bool IsLive(const NodeRecord& record, std::int64_t now_ms, std::int64_t liveness_window_ms) {
  return now_ms - record.last_seen_ms <= liveness_window_ms;
}

NodeId ElectLeader(const RegistrySnapshot& snapshot, std::optional<NodeId> override_id,
                   std::int64_t liveness_window_ms) {
  std::optional<NodeId> best;
  bool override_live = false;
  for (const auto& rec : snapshot.records) {
    if (!IsLive(rec, snapshot.taken_at_ms, liveness_window_ms)) continue;
    if (!best || rec.node_id > *best) best = rec.node_id;
    if (override_id && rec.node_id == *override_id) override_live = true;
  }
  if (!best) throw Error(ErrorCode::kEmptyRegistry, "no live node in registry");
  if (override_id) {
    if (!override_live) {
      throw Error(ErrorCode::kOverrideNotLive,
                  "override node " + std::to_string(override_id->value) + " is not live");
    }
    return *override_id;
  }
  return *best;
}

NodeRecord Registry::register_node(NodeId id, const std::string& address, std::int64_t now_ms) {
  ParseHostPort(address);
  NodeRecord rec{id, address, NodeRole::kFollower, now_ms};
  for (const auto& existing : store_.snapshot_nodes(now_ms).records) {
    if (existing.node_id != id) continue;
    if (existing.address != address && IsLive(existing, now_ms, liveness_window_ms_)) {
      throw Error(ErrorCode::kAddressConflict,
                  "node " + std::to_string(id.value) + " is registered live at " + existing.address);
    }
    rec.role = existing.role;
  }
  store_.upsert_node(ToNodeRow(rec));
  return rec;
}

void Registry::set_leader(NodeId leader) {
  std::vector<NodeTableRow> changed;
  for (auto rec : store_.snapshot_nodes().records) {
    const NodeRole want = rec.node_id == leader ? NodeRole::kLeader : NodeRole::kFollower;
    if (rec.role == want) continue;
    rec.role = want;
    changed.push_back(ToNodeRow(rec));
  }
  if (!changed.empty()) store_.upsert_nodes(changed);
}

std::optional<NodeId> Registry::recorded_leader() const {
  for (const auto& rec : store_.snapshot_nodes().records) {
    if (rec.role == NodeRole::kLeader) return rec.node_id;
  }
  return std::nullopt;
}

std::string_view ToString(Availability a) {
  return a == Availability::kAvailable ? "available" : "unavailable";
}

std::string EncodeNonce(std::uint64_t nonce) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(nonce));
  return buf;
}

Message MakePing(NodeId self, std::uint32_t cycle_id, std::uint64_t nonce) {
  return Message{kProtocolVersion, MessageKind::kPing, self, cycle_id, EncodeNonce(nonce)};
}

Message MakePong(const Message& ping, NodeId self) {
  return Message{kProtocolVersion, MessageKind::kPong, self, ping.cycle_id, ping.payload};
}

bool IsPongFor(const Message& reply, std::uint64_t nonce) {
  return reply.kind == MessageKind::kPong && reply.payload == EncodeNonce(nonce);
}

Availability CheckServerAvailable(Endpoint& endpoint, const Clock& clock,
                                  const std::string& leader_address, std::int64_t timeout_ms,
                                  NodeId self, std::uint64_t nonce, int retries) {
  if (timeout_ms <= 0) throw Error(ErrorCode::kInvalidArgument, "timeout_ms must be positive");
  for (int attempt = 0; attempt < retries; ++attempt) {
    endpoint.send(leader_address, MakePing(self, 0, nonce));
    const std::int64_t deadline_us = clock.now_us() + timeout_ms * 1000;
    // Unrelated traffic does not extend the window.
    while (true) {
      const std::int64_t left_us = deadline_us - clock.now_us();
      if (left_us <= 0) break;
      auto got = endpoint.recv((left_us + 999) / 1000);
      if (!got) break;
      if (got->from == leader_address && IsPongFor(got->message, nonce)) {
        return Availability::kAvailable;
      }
    }
  }
  return Availability::kUnavailable;
}

}  // namespace crowdmw

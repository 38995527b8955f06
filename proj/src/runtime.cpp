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

#include "crowdmw/runtime.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <tuple>

#include "crowdmw/checksum.hpp"
#include "crowdmw/error.hpp"

namespace crowdmw {

namespace {

template <typename T>
bool ParseNum(std::string_view s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return !s.empty() && ec == std::errc() && ptr == s.data() + s.size();
}

template <typename T>
T RequireNum(std::string_view s, std::string_view what) {
  T v{};
  if (!ParseNum(s, v)) {
    throw Error(ErrorCode::kMalformed, "bad " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

std::string Hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t ParseHex16(std::string_view s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (s.size() != 16 || ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kMalformed, "bad checksum '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> Split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto at = s.find(sep, pos);
    out.push_back(s.substr(pos, at == std::string_view::npos ? std::string_view::npos : at - pos));
    if (at == std::string_view::npos) break;
    pos = at + 1;
  }
  return out;
}

bool SubmittedLess(const SubmittedReading& a, const SubmittedReading& b) {
  if (auto c = PairOrder(a.pair, b.pair); c != 0) return c < 0;
  return a.seq < b.seq;
}

std::string AggregatesText(const Aggregates& agg) {
  std::vector<KeyValuePair> pairs;
  for (const auto& [k, v] : agg) pairs.push_back({k, v});
  return SerializePairs(pairs);
}

}  // namespace

void CycleConfig::Validate() const {
  if (cycle_duration_ms <= 0) throw Error(ErrorCode::kConfigError, "cycle_duration_ms must be > 0");
  if (mapreduce_window_ms <= 0 || mapreduce_window_ms >= cycle_duration_ms) {
    throw Error(ErrorCode::kConfigError, "mapreduce_window_ms must be in (0, cycle_duration_ms)");
  }
  if (min_responding_nodes < 2) throw Error(ErrorCode::kConfigError, "min_responding_nodes must be >= 2");
  if (retry_limit < 0) throw Error(ErrorCode::kConfigError, "retry_limit must be >= 0");
  if (ping_timeout_ms <= 0 || ping_retries < 1) {
    throw Error(ErrorCode::kConfigError, "ping timeout and retries must be positive");
  }
  if (submit_retry_ms <= 0) throw Error(ErrorCode::kConfigError, "submit_retry_ms must be > 0");
}

// ---------------------------------------------------------------- phases

std::string_view ToString(NodePhase phase) {
  switch (phase) {
    case NodePhase::kRegistering: return "REGISTERING";
    case NodePhase::kCheckingServer: return "CHECKING_SERVER";
    case NodePhase::kElecting: return "ELECTING";
    case NodePhase::kCollecting: return "COLLECTING";
    case NodePhase::kSubmitting: return "SUBMITTING";
    case NodePhase::kAwaitingSegment: return "AWAITING_SEGMENT";
    case NodePhase::kReducing: return "REDUCING";
    case NodePhase::kAwaitingResult: return "AWAITING_RESULT";
    case NodePhase::kConsolidating: return "CONSOLIDATING";
    case NodePhase::kDispatching: return "DISPATCHING";
    case NodePhase::kMerging: return "MERGING";
    case NodePhase::kCommitting: return "COMMITTING";
    case NodePhase::kBroadcasting: return "BROADCASTING";
  }
  return "?";
}

NodePhase ParseNodePhase(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(NodePhase::kBroadcasting); ++i) {
    const auto p = static_cast<NodePhase>(i);
    if (ToString(p) == name) return p;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown phase '" + std::string(name) + "'");
}

bool IsLegalTransition(NodePhase from, NodePhase to) {
  using P = NodePhase;
  if (to == P::kRegistering) return true;
  switch (from) {
    case P::kRegistering:
      return to == P::kCheckingServer;
    case P::kCheckingServer:
      return to == P::kElecting || to == P::kSubmitting || to == P::kCollecting;
    case P::kElecting:
      return to == P::kCheckingServer || to == P::kCollecting;
    case P::kCollecting:
      return to == P::kConsolidating;
    case P::kSubmitting:
      return to == P::kAwaitingSegment || to == P::kReducing || to == P::kCollecting ||
             to == P::kCheckingServer;
    case P::kAwaitingSegment:
      return to == P::kReducing || to == P::kCollecting || to == P::kCheckingServer;
    case P::kReducing:
      return to == P::kAwaitingResult;
    case P::kAwaitingResult:
      return to == P::kCollecting || to == P::kCheckingServer;
    case P::kConsolidating:
      return to == P::kDispatching || to == P::kBroadcasting;
    case P::kDispatching:
      return to == P::kMerging;
    case P::kMerging:
      return to == P::kCommitting;
    case P::kCommitting:
      return to == P::kBroadcasting;
    case P::kBroadcasting:
      return to == P::kCollecting || to == P::kElecting;
  }
  return false;
}

void ClientBuffer::prune(const std::map<int, std::uint64_t>& watermarks) {
  std::erase_if(pending, [&](const SensorReading& r) {
    const auto it = watermarks.find(r.room.number);
    return it != watermarks.end() && r.seq < it->second;
  });
}

// -------------------------------------------------------------- payloads

std::string EncodeSubmissionBody(const ClientBuffer& buffer) {
  std::vector<SubmittedReading> entries;
  entries.reserve(buffer.pending.size());
  for (const auto& r : buffer.pending) entries.push_back({MapReading(r, CountMode::kVisitor), r.seq});
  std::sort(entries.begin(), entries.end(), SubmittedLess);

  std::string out = "cov=";
  bool first = true;
  for (const auto& [room, next] : buffer.coverage) {
    if (!first) out.push_back(';');
    first = false;
    out += std::to_string(room) + ":" + std::to_string(next);
  }
  out.push_back('|');
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i) out.push_back(',');
    out += entries[i].pair.key + "=" + std::to_string(entries[i].pair.value) + "#" +
           std::to_string(entries[i].seq);
  }
  return out;
}

Submission DecodeSubmissionBody(std::string_view body) {
  const auto bar = body.find('|');
  if (bar == std::string_view::npos || body.substr(0, 4) != "cov=") {
    throw Error(ErrorCode::kMalformed, "submission header");
  }
  Submission sub;
  const std::string_view cov = body.substr(4, bar - 4);
  if (!cov.empty()) {
    for (auto item : Split(cov, ';')) {
      const auto colon = item.find(':');
      if (colon == std::string_view::npos) throw Error(ErrorCode::kMalformed, "coverage entry");
      sub.coverage[RequireNum<int>(item.substr(0, colon), "room")] =
          RequireNum<std::uint64_t>(item.substr(colon + 1), "coverage");
    }
  }
  const std::string_view entries = body.substr(bar + 1);
  if (!entries.empty()) {
    for (auto item : Split(entries, ',')) {
      const auto eq = item.find('=');
      const auto hash = item.find('#');
      if (eq == std::string_view::npos || hash == std::string_view::npos || hash < eq) {
        throw Error(ErrorCode::kMalformed, "submission entry '" + std::string(item) + "'");
      }
      SubmittedReading e;
      e.pair.key = std::string(item.substr(0, eq));
      e.pair.value = RequireNum<std::uint64_t>(item.substr(eq + 1, hash - eq - 1), "room");
      e.seq = RequireNum<std::uint64_t>(item.substr(hash + 1), "seq");
      if (!IsValidKey(e.pair.key, CountMode::kVisitor)) {
        throw Error(ErrorCode::kMalformed, "submission key '" + e.pair.key + "'");
      }
      sub.entries.push_back(std::move(e));
    }
  }
  return sub;
}

std::string EncodeSegmentBody(const Segment& segment) {
  return std::to_string(segment.segment_index) + ";" + Hex16(segment.checksum) + ";" +
         SerializePairs(segment.pairs);
}

SegmentWire DecodeSegmentBody(std::string_view body) {
  const auto a = body.find(';');
  const auto b = a == std::string_view::npos ? a : body.find(';', a + 1);
  if (b == std::string_view::npos) throw Error(ErrorCode::kMalformed, "segment body");
  SegmentWire w;
  w.index = RequireNum<std::size_t>(body.substr(0, a), "segment index");
  w.checksum = ParseHex16(body.substr(a + 1, b - a - 1));
  w.pairs_text = std::string(body.substr(b + 1));
  return w;
}

SegmentReduction ReduceAssigned(const SegmentWire& wire, NodeId self,
                                std::span<const CountMode> modes, int room_count) {
  if (Crc64(wire.pairs_text) != wire.checksum) {
    throw Error(ErrorCode::kChecksumMismatch, "segment " + std::to_string(wire.index));
  }
  const auto pairs = ParsePairs(wire.pairs_text);
  SegmentReduction out;
  out.assignee = self;
  out.segment_index = wire.index;
  out.input_pair_count = pairs.size();
  for (CountMode mode : modes) {
    Segment seg;
    seg.assignee = self;
    seg.segment_index = wire.index;
    seg.pairs = mode == CountMode::kVisitor ? pairs : ToRoomPairs(pairs, room_count);
    seg.checksum = SegmentChecksum(seg.pairs);
    out.partials.push_back(ReduceSegment(seg, mode, room_count));
  }
  return out;
}

std::string EncodeReduceBody(const SegmentReduction& reduction) {
  std::string visitor = "-";
  std::string room = "-";
  for (const auto& p : reduction.partials) {
    (p.mode == CountMode::kVisitor ? visitor : room) = AggregatesText(p.aggregates);
  }
  std::string body = std::to_string(reduction.segment_index) + ";" +
                     std::to_string(reduction.input_pair_count) + ";" + visitor + ";" + room;
  return body + ";" + Hex16(Crc64(body));
}

SegmentReduction DecodeReduceBody(std::string_view body, NodeId sender) {
  SegmentReduction out;
  out.assignee = sender;
  out.checksum_verified = false;
  const auto last = body.rfind(';');
  if (last == std::string_view::npos) return out;
  const std::string_view signed_part = body.substr(0, last);
  try {
    if (Crc64(signed_part) != ParseHex16(body.substr(last + 1))) return out;
    const auto f = Split(signed_part, ';');
    if (f.size() != 4) return out;
    out.segment_index = RequireNum<std::size_t>(f[0], "segment index");
    out.input_pair_count = RequireNum<std::uint64_t>(f[1], "count");
    const CountMode modes[] = {CountMode::kVisitor, CountMode::kRoom};
    for (int i = 0; i < 2; ++i) {
      if (f[2 + i] == "-") continue;
      PartialResult p;
      p.assignee = sender;
      p.mode = modes[i];
      p.input_pair_count = out.input_pair_count;
      for (auto& kv : ParsePairs(f[2 + i])) p.aggregates[kv.key] = kv.value;
      out.partials.push_back(std::move(p));
    }
    out.checksum_verified = true;
  } catch (const Error&) {
    out.checksum_verified = false;
  }
  return out;
}

std::string EncodeWatermarks(const std::map<int, std::uint64_t>& watermarks) {
  std::string out;
  for (const auto& [room, wm] : watermarks) {
    if (!out.empty()) out.push_back(',');
    out += std::to_string(room) + ":" + std::to_string(wm);
  }
  return out;
}

std::map<int, std::uint64_t> DecodeWatermarks(std::string_view body) {
  std::map<int, std::uint64_t> out;
  if (body.empty()) return out;
  for (auto item : Split(body, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) throw Error(ErrorCode::kMalformed, "watermark entry");
    out[RequireNum<int>(item.substr(0, colon), "room")] =
        RequireNum<std::uint64_t>(item.substr(colon + 1), "watermark");
  }
  return out;
}

// -------------------------------------------------------------- chunking

std::vector<std::string> Fragment(std::uint32_t xfer, std::string_view body, std::size_t max_payload) {
  // Room for "<xfer>:<part>/<total>|" with 10-digit numbers.
  constexpr std::size_t kHeaderRoom = 34;
  if (max_payload <= kHeaderRoom) throw Error(ErrorCode::kInvalidArgument, "max_payload too small");
  const std::size_t slice = max_payload - kHeaderRoom;
  const std::size_t total = body.empty() ? 1 : (body.size() + slice - 1) / slice;
  std::vector<std::string> parts;
  parts.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    parts.push_back(std::to_string(xfer) + ":" + std::to_string(i) + "/" + std::to_string(total) + "|" +
                    std::string(body.substr(std::min(body.size(), i * slice), slice)));
  }
  return parts;
}

Reassembler::Result Reassembler::add(const std::string& from, const Message& message) {
  const std::string_view p = message.payload;
  const auto colon = p.find(':');
  const auto slash = p.find('/');
  const auto bar = p.find('|');
  std::uint32_t xfer = 0;
  std::size_t part = 0;
  std::size_t total = 0;
  if (colon == std::string_view::npos || slash == std::string_view::npos ||
      bar == std::string_view::npos || !(colon < slash && slash < bar) ||
      !ParseNum(p.substr(0, colon), xfer) || !ParseNum(p.substr(colon + 1, slash - colon - 1), part) ||
      !ParseNum(p.substr(slash + 1, bar - slash - 1), total) || total == 0 || part >= total ||
      total > 4096) {
    return {Status::kMalformed, std::nullopt, 0};
  }
  const Key key{from, message.kind, message.cycle_id, xfer};
  if (done_.count(key)) return {Status::kAlreadyComplete, std::nullopt, xfer};
  auto& slots = partial_[key];
  if (slots.empty()) slots.resize(total);
  if (slots.size() != total) return {Status::kMalformed, std::nullopt, xfer};
  slots[part] = std::string(p.substr(bar + 1));
  if (std::any_of(slots.begin(), slots.end(), [](const auto& s) { return !s.has_value(); })) {
    return {Status::kIncomplete, std::nullopt, xfer};
  }
  std::string body;
  for (auto& s : slots) body += *s;
  partial_.erase(key);
  done_.insert(key);
  return {Status::kCompleted, Complete{xfer, std::move(body)}, xfer};
}

void Reassembler::clear() {
  partial_.clear();
  done_.clear();
}

// ------------------------------------------------------------ leader side

std::string_view ToString(IntegrityVerdict v) {
  return v == IntegrityVerdict::kIntact ? "intact" : "corrupt";
}

IntegrityVerdict IntegrityCheck(std::uint64_t submitted_pair_total,
                                std::span<const SegmentReduction> partials) {
  for (const auto& r : partials) {
    if (!r.checksum_verified) return IntegrityVerdict::kCorrupt;
  }
  std::uint64_t total = 0;
  std::map<CountMode, std::uint64_t> per_mode;
  for (const auto& r : partials) {
    total += r.input_pair_count;
    for (const auto& p : r.partials) {
      if (p.input_pair_count != r.input_pair_count) return IntegrityVerdict::kCorrupt;
      per_mode[p.mode] += p.input_pair_count;
      std::uint64_t sum = 0;
      for (const auto& [k, v] : p.aggregates) sum += v;
      // Room counts are occurrences, so they must add up to the pairs seen.
      if (p.mode == CountMode::kRoom && sum != p.input_pair_count) return IntegrityVerdict::kCorrupt;
    }
  }
  if (total != submitted_pair_total) return IntegrityVerdict::kCorrupt;
  for (const auto& [mode, sum] : per_mode) {
    if (sum != submitted_pair_total) return IntegrityVerdict::kCorrupt;
  }
  return IntegrityVerdict::kIntact;
}

CycleCoordinator::CycleCoordinator(std::uint64_t cycle_id, NodeId leader,
                                   std::vector<CountMode> modes, int room_count)
    : cycle_id_(cycle_id), leader_(leader), modes_(std::move(modes)), room_count_(room_count) {}

void CycleCoordinator::add_submission(Submission submission) {
  const NodeId node = submission.node;
  submissions_[node] = std::move(submission);
}

const std::vector<Segment>& CycleCoordinator::consolidate(
    const std::map<int, std::uint64_t>& watermarks) {
  auto committed_below = [&](int room) {
    const auto it = watermarks.find(room);
    return it == watermarks.end() ? std::uint64_t{0} : it->second;
  };
  struct Item {
    KeyValuePair pair;
    int room;
    std::uint64_t seq;
  };
  std::vector<Item> items;
  std::set<std::pair<int, std::uint64_t>> seen;
  std::map<int, std::uint64_t> reach;
  for (const auto& [node, sub] : submissions_) {
    for (const auto& [room, next] : sub.coverage) reach[room] = std::max(reach[room], next);
    for (const auto& e : sub.entries) {
      const int room = static_cast<int>(e.pair.value);
      if (e.seq < committed_below(room)) continue;
      if (!seen.insert({room, e.seq}).second) continue;
      items.push_back({e.pair, room, e.seq});
    }
  }
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    if (auto c = PairOrder(a.pair, b.pair); c != 0) return c < 0;
    return std::tie(a.room, a.seq) < std::tie(b.room, b.seq);
  });

  consolidated_ = {};
  for (auto& item : items) consolidated_.sorted_pairs.push_back(std::move(item.pair));
  for (const auto& [room, next] : reach) {
    const std::uint64_t from = committed_below(room);
    if (next > from) consolidated_.progress.push_back({cycle_id_, room, from, next});
  }
  for (const auto& [node, sub] : submissions_) consolidated_.responders.push_back(node);

  segments_ = Partition(consolidated_.sorted_pairs, consolidated_.responders);
  reductions_.clear();
  return segments_;
}

bool CycleCoordinator::accept(const SegmentReduction& reduction) {
  if (!reduction.checksum_verified || reduction.segment_index >= segments_.size()) return false;
  const Segment& seg = segments_[reduction.segment_index];
  if (seg.assignee != reduction.assignee) return false;
  if (reduction.input_pair_count != seg.pairs.size()) return false;
  if (reduction.partials.size() != modes_.size()) return false;
  for (const auto& p : reduction.partials) {
    if (std::find(modes_.begin(), modes_.end(), p.mode) == modes_.end()) return false;
    if (p.input_pair_count != seg.pairs.size()) return false;
    for (const auto& [key, value] : p.aggregates) {
      if (!IsValidKey(key, p.mode, room_count_)) return false;
    }
  }
  reductions_[reduction.segment_index] = reduction;
  return true;
}

std::vector<std::size_t> CycleCoordinator::missing() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (!reductions_.count(i)) out.push_back(i);
  }
  return out;
}

void CycleCoordinator::reduce_locally(std::size_t index) {
  const Segment& seg = segments_.at(index);
  SegmentWire wire{index, seg.checksum, SerializePairs(seg.pairs)};
  SegmentReduction red = ReduceAssigned(wire, seg.assignee, modes_, room_count_);
  reductions_[index] = std::move(red);
  if (seg.assignee != leader_) ++local_fallbacks_;
}

IntegrityVerdict CycleCoordinator::verdict() const {
  if (!complete()) return IntegrityVerdict::kCorrupt;
  std::vector<SegmentReduction> all;
  for (const auto& [i, r] : reductions_) all.push_back(r);
  return IntegrityCheck(consolidated_.sorted_pairs.size(), all);
}

CycleResult CycleCoordinator::result() const {
  if (verdict() != IntegrityVerdict::kIntact) {
    throw Error(ErrorCode::kIntegrityFailure, "cycle " + std::to_string(cycle_id_));
  }
  Aggregates visitor;
  Aggregates room;
  for (CountMode mode : modes_) {
    std::vector<PartialResult> partials;
    for (const auto& [i, r] : reductions_) {
      for (const auto& p : r.partials) {
        if (p.mode == mode) partials.push_back(p);
      }
    }
    auto merged = MergePartials(partials, mode).aggregates;
    (mode == CountMode::kVisitor ? visitor : room) = std::move(merged);
  }
  return MakeCycleResult(cycle_id_, visitor, room, consolidated_.sorted_pairs.size(), room_count_);
}

LeaderCycleOutcome LeaderCycle(std::uint64_t cycle_id, NodeId leader,
                               std::vector<Submission> submissions, const CycleConfig& config,
                               std::vector<CountMode> modes,
                               const std::map<int, std::uint64_t>& watermarks,
                               const RemoteReduce& remote, int room_count) {
  LeaderCycleOutcome out;
  CycleCoordinator coord(cycle_id, leader, std::move(modes), room_count);
  for (auto& s : submissions) coord.add_submission(std::move(s));
  if (coord.responder_count() < static_cast<std::size_t>(config.min_responding_nodes)) {
    out.abort_sent = true;
    out.reelection_requested = true;
    out.reason = std::to_string(coord.responder_count()) + " of " +
                 std::to_string(config.min_responding_nodes) + " required nodes responded";
    return out;
  }
  const auto& segments = coord.consolidate(watermarks);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (segments[i].assignee == leader) {
      coord.reduce_locally(i);
      continue;
    }
    for (int attempt = 0; attempt <= config.retry_limit; ++attempt) {
      auto reply = remote(segments[i]);
      if (reply && coord.accept(*reply)) break;
    }
  }
  for (std::size_t i : coord.missing()) coord.reduce_locally(i);
  for (int attempt = 0; attempt < config.retry_limit && coord.verdict() != IntegrityVerdict::kIntact; ++attempt) {
    for (std::size_t i = 0; i < segments.size(); ++i) coord.reduce_locally(i);
  }
  out.local_fallbacks = coord.local_fallbacks();
  if (coord.verdict() != IntegrityVerdict::kIntact) {
    out.abort_sent = true;
    out.reason = "integrity check failed";
    return out;
  }
  out.result = coord.result();
  out.progress = coord.consolidated().progress;
  out.committed = true;
  return out;
}

Submission MakeSubmission(NodeId node, std::string address, std::span<const SensorReading> readings) {
  ClientBuffer buffer;
  for (const auto& r : readings) {
    buffer.pending.push_back(r);
    auto& cov = buffer.coverage[r.room.number];
    cov = std::max(cov, r.seq + 1);
  }
  Submission sub = DecodeSubmissionBody(EncodeSubmissionBody(buffer));
  sub.node = node;
  sub.address = std::move(address);
  return sub;
}

}  // namespace crowdmw

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

// Cycle protocol building blocks: configuration, the node phase graph,
// the client-side buffer, payload bodies, and the leader-side cycle
// coordinator (consolidate, partition, collect partials, integrity check).

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crowdmw/domain.hpp"
#include "crowdmw/mapreduce.hpp"
#include "crowdmw/message.hpp"
#include "crowdmw/store.hpp"

namespace crowdmw {

struct CycleConfig {
  std::int64_t cycle_duration_ms = 2000;
  std::int64_t mapreduce_window_ms = 500;
  int min_responding_nodes = 2;
  int retry_limit = 3;
  std::int64_t ping_timeout_ms = 150;
  int ping_retries = 2;
  std::int64_t submit_retry_ms = 250;

  // Throws kConfigError.
  void Validate() const;

  // A record is live while its last_seen is within two check intervals.
  std::int64_t liveness_window_ms() const { return 2 * cycle_duration_ms; }
};

enum class NodePhase : std::uint8_t {
  kRegistering,
  kCheckingServer,
  kElecting,
  kCollecting,
  kSubmitting,
  kAwaitingSegment,
  kReducing,
  kAwaitingResult,
  kConsolidating,
  kDispatching,
  kMerging,
  kCommitting,
  kBroadcasting,
};

std::string_view ToString(NodePhase phase);
// Throws kInvalidArgument.
NodePhase ParseNodePhase(std::string_view name);

// Legal edges of the phase graph. Every phase may go to REGISTERING when
// a new cycle starts.
bool IsLegalTransition(NodePhase from, NodePhase to);

// Readings collected locally and not yet covered by a CYCLE_SUCCESS.
struct ClientBuffer {
  std::vector<SensorReading> pending;
  // Per room: one past the highest doorway sequence collected, including
  // double reads that were dropped.
  std::map<int, std::uint64_t> coverage;
  std::uint32_t committed_through = 0;

  // Drops everything below the committed watermarks.
  void prune(const std::map<int, std::uint64_t>& watermarks);
};

// ------------------------------------------------------------ payloads

struct SubmittedReading {
  KeyValuePair pair;  // VISITOR pair: (tag, room number)
  std::uint64_t seq = 0;

  friend bool operator==(const SubmittedReading&, const SubmittedReading&) = default;
};

struct Submission {
  NodeId node;
  std::string address;
  std::map<int, std::uint64_t> coverage;
  std::vector<SubmittedReading> entries;  // sorted by pair, then seq
};

// DATA_SUBMIT body: "cov=<room>:<next>;...|<tag>=<room>#<seq>,...".
std::string EncodeSubmissionBody(const ClientBuffer& buffer);
// Throws kMalformed.
Submission DecodeSubmissionBody(std::string_view body);

// SEGMENT_ASSIGN body: "<index>;<crc hex>;<pairs>".
std::string EncodeSegmentBody(const Segment& segment);
struct SegmentWire {
  std::size_t index = 0;
  std::uint64_t checksum = 0;
  std::string pairs_text;
};
SegmentWire DecodeSegmentBody(std::string_view body);

// A client's reduction of one segment, in every requested mode.
struct SegmentReduction {
  NodeId assignee;
  std::size_t segment_index = 0;
  std::uint64_t input_pair_count = 0;
  std::vector<PartialResult> partials;  // one per mode
  bool checksum_verified = true;
};

// Reduces a received segment. The room-mode partial is computed from the
// VISITOR pairs re-keyed to rooms. Throws kChecksumMismatch.
SegmentReduction ReduceAssigned(const SegmentWire& wire, NodeId self,
                                std::span<const CountMode> modes,
                                int room_count = kDefaultRoomCount);

// REDUCE_RESULT body: "<index>;<count>;<visitor pairs>;<room pairs>;<crc>",
// the crc covering everything before the last ';'. A missing mode is an
// empty field marked "-".
std::string EncodeReduceBody(const SegmentReduction& reduction);
// Never throws: a body that fails the crc or does not parse comes back
// with checksum_verified = false.
SegmentReduction DecodeReduceBody(std::string_view body, NodeId sender);

// CYCLE_SUCCESS body: "<room>:<watermark>,..."
std::string EncodeWatermarks(const std::map<int, std::uint64_t>& watermarks);
std::map<int, std::uint64_t> DecodeWatermarks(std::string_view body);

// ------------------------------------------------------------ chunking

// Splits `body` into payloads "<xfer>:<part>/<total>|<slice>" that each fit
// in one datagram.
std::vector<std::string> Fragment(std::uint32_t xfer, std::string_view body,
                                  std::size_t max_payload = kMaxPayload);

class Reassembler {
 public:
  struct Complete {
    std::uint32_t xfer;
    std::string body;
  };
  enum class Status { kIncomplete, kCompleted, kAlreadyComplete, kMalformed };
  struct Result {
    Status status;
    std::optional<Complete> complete;
    std::uint32_t xfer = 0;
  };

  // Keyed by (sender, kind, cycle, xfer).
  Result add(const std::string& from, const Message& message);
  void clear();

 private:
  struct Key {
    std::string from;
    MessageKind kind;
    std::uint32_t cycle;
    std::uint32_t xfer;
    auto operator<=>(const Key&) const = default;
  };
  std::map<Key, std::vector<std::optional<std::string>>> partial_;
  std::set<Key> done_;
};

// ------------------------------------------------------------ leader side

enum class IntegrityVerdict : std::uint8_t { kIntact, kCorrupt };

std::string_view ToString(IntegrityVerdict v);

// Intact iff every partial verified its checksum on receipt and, in every
// mode, the partial input counts sum to the number of pairs dispatched.
IntegrityVerdict IntegrityCheck(std::uint64_t submitted_pair_total,
                                std::span<const SegmentReduction> partials);

struct ConsolidatedCycle {
  std::vector<KeyValuePair> sorted_pairs;
  std::vector<ProgressRow> progress;
  std::vector<NodeId> responders;  // ascending
};

// Collects one cycle's submissions on the leader and drives the
// consolidate / partition / merge steps.
class CycleCoordinator {
 public:
  CycleCoordinator(std::uint64_t cycle_id, NodeId leader, std::vector<CountMode> modes,
                   int room_count = kDefaultRoomCount);

  // A later submission from the same node replaces the earlier one.
  void add_submission(Submission submission);
  std::size_t responder_count() const { return submissions_.size(); }
  const std::map<NodeId, Submission>& submissions() const { return submissions_; }

  // Drops readings already committed (below `watermarks`) or submitted
  // twice, merges the rest into one sorted list and partitions it across
  // the responders.
  const std::vector<Segment>& consolidate(const std::map<int, std::uint64_t>& watermarks);

  const ConsolidatedCycle& consolidated() const { return consolidated_; }
  const std::vector<Segment>& segments() const { return segments_; }

  // Rejects reductions for unknown segments or from the wrong node.
  bool accept(const SegmentReduction& reduction);
  std::vector<std::size_t> missing() const;
  // Local fallback: the leader reduces the segment itself.
  void reduce_locally(std::size_t index);
  bool complete() const { return missing().empty(); }
  int local_fallbacks() const { return local_fallbacks_; }

  IntegrityVerdict verdict() const;
  // Throws kIntegrityFailure when the verdict is corrupt.
  CycleResult result() const;

  std::uint64_t cycle_id() const { return cycle_id_; }
  const std::vector<CountMode>& modes() const { return modes_; }

 private:
  std::uint64_t cycle_id_;
  NodeId leader_;
  std::vector<CountMode> modes_;
  int room_count_;
  std::map<NodeId, Submission> submissions_;
  ConsolidatedCycle consolidated_;
  std::vector<Segment> segments_;
  std::map<std::size_t, SegmentReduction> reductions_;
  int local_fallbacks_ = 0;
};

struct LeaderCycleOutcome {
  bool committed = false;
  bool abort_sent = false;
  bool reelection_requested = false;
  std::optional<CycleResult> result;
  std::vector<ProgressRow> progress;
  int local_fallbacks = 0;
  std::string reason;
};

// Remote reduction of one segment; nullopt models a lost or late reply.
using RemoteReduce = std::function<std::optional<SegmentReduction>(const Segment&)>;

// Synchronous leader cycle over already-received submissions: quorum
// check, consolidation, dispatch through `remote` (the leader's own segment
// is reduced locally), up to `retry_limit` re-dispatches of missing or
// corrupt partials and then local fallback, integrity check and result.
// Does not touch the store.
LeaderCycleOutcome LeaderCycle(std::uint64_t cycle_id, NodeId leader,
                               std::vector<Submission> submissions, const CycleConfig& config,
                               std::vector<CountMode> modes,
                               const std::map<int, std::uint64_t>& watermarks,
                               const RemoteReduce& remote, int room_count = kDefaultRoomCount);

// Builds a submission directly from readings, as a client would.
Submission MakeSubmission(NodeId node, std::string address, std::span<const SensorReading> readings);

}  // namespace crowdmw

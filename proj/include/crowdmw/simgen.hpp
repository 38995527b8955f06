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

// Seeded RFID reading generator, replayable fixtures, and the sensor field
// that hands readings to whichever node currently collects each room.

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "crowdmw/domain.hpp"

namespace crowdmw {

// Two reads of one badge at one room within this window are one visit.
inline constexpr std::int64_t kDoubleReadWindowMs = 1000;

struct VisitorModel {
  std::uint64_t seed = 1;
  int visitor_count = 0;
  std::array<double, 3> tag_mix{0.4, 0.5, 0.1};  // man, woman, other
  int rooms = kDefaultRoomCount;
  std::int64_t dwell_min_ms = 1000;
  std::int64_t dwell_max_ms = 3000;
  double double_read_rate = 0.02;

  // Throws kConfigError.
  void Validate() const;
};

struct LedgerRecord {
  std::uint64_t sequence = 0;  // dense from 0, stream order
  TagCategory tag = TagCategory::kMan;
  RoomId room;
  std::int64_t timestamp_ms = 0;
  std::uint64_t room_seq = 0;
  std::uint32_t reader_id = 0;
  bool duplicate = false;  // second reader of the same doorway pass
};

struct GenerationLedger {
  std::vector<LedgerRecord> records;
};

struct GeneratedStream {
  std::vector<SensorReading> readings;  // timestamp order
  GenerationLedger ledger;
};

// Deterministic per (model, duration). Each visitor arrives uniformly in
// [0, duration), walks rooms without immediate repeats and dwells
// uniform(dwell range) in each. One read per room entry; with
// double_read_rate the doorway's second reader reads the badge again a
// few hundred milliseconds later.
GeneratedStream GenerateStream(const VisitorModel& model, std::int64_t duration_ms);

// Canonical "tag=room" comma stream. Readings are 100 ms apart starting at
// `start_ms`, one badge each.
std::vector<SensorReading> ParseFixtureText(std::string_view text, std::int64_t start_ms = 0,
                                            int room_count = kDefaultRoomCount);

std::filesystem::path DefaultFixtureDir();
std::vector<std::string> ListFixtures(const std::filesystem::path& dir = DefaultFixtureDir());
// Throws kUnknownFixture.
std::vector<SensorReading> ReplayFixture(std::string_view name,
                                         const std::filesystem::path& dir = DefaultFixtureDir());
GenerationLedger LedgerFor(const std::vector<SensorReading>& readings);

struct Collected {
  std::vector<SensorReading> readings;
  // Recently acknowledged reads handed over with a room, only for
  // double-read suppression.
  std::vector<SensorReading> context;
};

// Where a node collects readings from.
class ReadingSource {
 public:
  virtual ~ReadingSource() = default;
  virtual Collected collect(NodeId carrier, std::int64_t now_ms) = 0;
  // Everything in `room` below `watermark` is committed.
  virtual void acknowledge(int room, std::uint64_t watermark) = 0;
};

// The readers of every doorway. Readings become available once their
// timestamp is in the past, and stay in the doorway backlog until a commit
// acknowledges them, so a room can move to another node without loss.
class SensorField final : public ReadingSource {
 public:
  using CarrierFn = std::function<std::optional<NodeId>(int room)>;

  SensorField(std::vector<SensorReading> stream, int room_count, CarrierFn carrier);

  Collected collect(NodeId carrier, std::int64_t now_ms) override;
  void acknowledge(int room, std::uint64_t watermark) override;

  // Released but unacknowledged readings per room, for reconciliation.
  std::vector<SensorReading> backlog() const;

 private:
  struct Doorway {
    std::vector<SensorReading> stream;
    std::size_t released = 0;
    std::deque<SensorReading> backlog;
    std::deque<SensorReading> recent_acked;
    std::optional<NodeId> carrier;
    std::uint64_t handed_through = 0;
  };

  void release(Doorway& door, std::int64_t now_ms);

  mutable std::mutex mu_;
  std::map<int, Doorway> doors_;
  CarrierFn carrier_;
};

}  // namespace crowdmw

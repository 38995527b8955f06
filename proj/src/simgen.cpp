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

#include "crowdmw/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "crowdmw/error.hpp"
#include "crowdmw/mapreduce.hpp"

#ifndef CROWDMW_FIXTURE_DIR
#define CROWDMW_FIXTURE_DIR "fixtures"
#endif

namespace crowdmw {

namespace {

// Portable draws: std distributions are implementation-defined.
double Unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::int64_t UniformInt(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<std::int64_t>(rng() % span);
}

TagCategory DrawTag(std::mt19937_64& rng, const std::array<double, 3>& mix) {
  const double u = Unit(rng);
  if (u < mix[0]) return TagCategory::kMan;
  if (u < mix[0] + mix[1]) return TagCategory::kWoman;
  return TagCategory::kOther;
}

constexpr std::int64_t kSecondReadMaxDelayMs = 300;

}  // namespace

void VisitorModel::Validate() const {
  if (visitor_count < 0) throw Error(ErrorCode::kConfigError, "visitor_count must be >= 0");
  double sum = 0;
  for (double p : tag_mix) {
    if (p < 0) throw Error(ErrorCode::kConfigError, "tag_mix entries must be >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::kConfigError, "tag_mix must sum to 1");
  if (rooms < 1) throw Error(ErrorCode::kConfigError, "rooms must be >= 1");
  if (dwell_min_ms < kDoubleReadWindowMs || dwell_min_ms > dwell_max_ms) {
    throw Error(ErrorCode::kConfigError, "dwell range must satisfy " +
                                             std::to_string(kDoubleReadWindowMs) +
                                             " <= min <= max");
  }
  if (!(double_read_rate >= 0.0 && double_read_rate <= 1.0)) {
    throw Error(ErrorCode::kConfigError, "double_read_rate must be in [0,1]");
  }
}

GeneratedStream GenerateStream(const VisitorModel& model, std::int64_t duration_ms) {
  model.Validate();
  std::mt19937_64 rng(model.seed);

  struct Raw {
    SensorReading reading;
    bool duplicate;
  };
  std::vector<Raw> raw;
  for (int v = 0; v < model.visitor_count && duration_ms > 0; ++v) {
    const TagCategory tag = DrawTag(rng, model.tag_mix);
    std::int64_t t = UniformInt(rng, 0, duration_ms - 1);
    const int visits = static_cast<int>(UniformInt(rng, 1, 2 * model.rooms));
    int room = 0;
    for (int i = 0; i < visits && t < duration_ms; ++i) {
      if (room == 0 || model.rooms == 1) {
        room = static_cast<int>(UniformInt(rng, 1, model.rooms));
      } else {
        const int next = static_cast<int>(UniformInt(rng, 1, model.rooms - 1));
        room = next >= room ? next + 1 : next;
      }
      const auto reader = static_cast<std::uint32_t>(2 * (room - 1) + UniformInt(rng, 0, 1));
      SensorReading r{tag, RoomId{room}, t, reader, 0, static_cast<std::uint32_t>(v)};
      raw.push_back({r, false});
      const bool twice = Unit(rng) < model.double_read_rate;
      const std::int64_t delay = UniformInt(rng, 1, kSecondReadMaxDelayMs);
      if (twice && t + delay < duration_ms) {
        SensorReading dup = r;
        dup.timestamp_ms = t + delay;
        dup.reader_id = reader ^ 1u;
        raw.push_back({dup, true});
      }
      t += UniformInt(rng, model.dwell_min_ms, model.dwell_max_ms);
    }
  }

  std::stable_sort(raw.begin(), raw.end(), [](const Raw& a, const Raw& b) {
    if (a.reading.timestamp_ms != b.reading.timestamp_ms) return a.reading.timestamp_ms < b.reading.timestamp_ms;
    if (a.reading.room != b.reading.room) return a.reading.room < b.reading.room;
    if (a.reading.badge != b.reading.badge) return a.reading.badge < b.reading.badge;
    return a.reading.reader_id < b.reading.reader_id;
  });

  GeneratedStream out;
  std::map<int, std::uint64_t> next_seq;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    SensorReading r = raw[i].reading;
    r.seq = next_seq[r.room.number]++;
    out.readings.push_back(r);
    out.ledger.records.push_back(
        {i, r.tag, r.room, r.timestamp_ms, r.seq, r.reader_id, raw[i].duplicate});
  }
  return out;
}

std::vector<SensorReading> ParseFixtureText(std::string_view text, std::int64_t start_ms,
                                            int room_count) {
  std::string compact;
  for (char c : text) {
    if (c != ' ' && c != '\n' && c != '\r' && c != '\t') compact.push_back(c);
  }
  std::vector<SensorReading> out;
  std::map<int, std::uint64_t> next_seq;
  std::uint32_t badge = 0;
  for (const auto& pair : ParsePairs(compact)) {
    const RoomId room = MakeRoom(static_cast<int>(pair.value), room_count);
    SensorReading r;
    r.tag = ParseTag(pair.key);
    r.room = room;
    r.timestamp_ms = start_ms + 100 * static_cast<std::int64_t>(out.size());
    r.reader_id = static_cast<std::uint32_t>(2 * (room.number - 1));
    r.seq = next_seq[room.number]++;
    r.badge = badge++;
    out.push_back(r);
  }
  return out;
}

std::filesystem::path DefaultFixtureDir() { return CROWDMW_FIXTURE_DIR; }

std::vector<std::string> ListFixtures(const std::filesystem::path& dir) {
  std::vector<std::string> names;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (entry.path().extension() == ".txt") names.push_back(entry.path().stem().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::vector<SensorReading> ReplayFixture(std::string_view name, const std::filesystem::path& dir) {
  const auto path = dir / (std::string(name) + ".txt");
  std::ifstream in(path);
  if (name.empty() || name.find('/') != std::string_view::npos || !in) {
    throw Error(ErrorCode::kUnknownFixture, "'" + std::string(name) + "' in " + dir.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseFixtureText(ss.str());
}

GenerationLedger LedgerFor(const std::vector<SensorReading>& readings) {
  GenerationLedger ledger;
  for (std::size_t i = 0; i < readings.size(); ++i) {
    const auto& r = readings[i];
    ledger.records.push_back({i, r.tag, r.room, r.timestamp_ms, r.seq, r.reader_id, false});
  }
  return ledger;
}

// ------------------------------------------------------------ sensor field

SensorField::SensorField(std::vector<SensorReading> stream, int room_count, CarrierFn carrier)
    : carrier_(std::move(carrier)) {
  for (int room = 1; room <= room_count; ++room) doors_[room];
  for (auto& r : stream) doors_[r.room.number].stream.push_back(r);
  for (auto& [room, door] : doors_) {
    std::stable_sort(door.stream.begin(), door.stream.end(),
                     [](const SensorReading& a, const SensorReading& b) { return a.seq < b.seq; });
  }
}

void SensorField::release(Doorway& door, std::int64_t now_ms) {
  while (door.released < door.stream.size() && door.stream[door.released].timestamp_ms < now_ms) {
    door.backlog.push_back(door.stream[door.released++]);
  }
}

Collected SensorField::collect(NodeId carrier, std::int64_t now_ms) {
  std::lock_guard lock(mu_);
  Collected out;
  for (auto& [room, door] : doors_) {
    const auto owner = carrier_(room);
    if (!owner || *owner != carrier) continue;
    release(door, now_ms);
    const bool handover = !door.carrier || *door.carrier != carrier;
    if (handover) {
      door.carrier = carrier;
      door.handed_through = 0;
      out.context.insert(out.context.end(), door.recent_acked.begin(), door.recent_acked.end());
    }
    for (const auto& r : door.backlog) {
      if (r.seq >= door.handed_through) out.readings.push_back(r);
    }
    if (!door.backlog.empty()) {
      door.handed_through = std::max(door.handed_through, door.backlog.back().seq + 1);
    }
  }
  std::stable_sort(out.readings.begin(), out.readings.end(),
                   [](const SensorReading& a, const SensorReading& b) {
                     return a.timestamp_ms < b.timestamp_ms;
                   });
  return out;
}

void SensorField::acknowledge(int room, std::uint64_t watermark) {
  std::lock_guard lock(mu_);
  auto it = doors_.find(room);
  if (it == doors_.end()) return;
  auto& door = it->second;
  while (!door.backlog.empty() && door.backlog.front().seq < watermark) {
    door.recent_acked.push_back(door.backlog.front());
    door.backlog.pop_front();
  }
  if (!door.recent_acked.empty()) {
    const std::int64_t newest = door.recent_acked.back().timestamp_ms;
    while (door.recent_acked.front().timestamp_ms < newest - kDoubleReadWindowMs) {
      door.recent_acked.pop_front();
    }
  }
}

std::vector<SensorReading> SensorField::backlog() const {
  std::lock_guard lock(mu_);
  std::vector<SensorReading> out;
  for (const auto& [room, door] : doors_) out.insert(out.end(), door.backlog.begin(), door.backlog.end());
  return out;
}

}  // namespace crowdmw

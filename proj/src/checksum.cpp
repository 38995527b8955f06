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

#include "crowdmw/checksum.hpp"

#include <array>

namespace crowdmw {

namespace {

// Reflected form of 0x42F0E1EBA9EA3693.
constexpr std::uint64_t kPolyReflected = 0xC96C5795D7870F42ULL;

constexpr std::array<std::uint64_t, 256> MakeTable() {
  std::array<std::uint64_t, 256> table{};
  for (std::uint64_t i = 0; i < 256; ++i) {
    std::uint64_t crc = i;
    for (int bit = 0; bit < 8; ++bit) {
      crc = (crc & 1) ? (crc >> 1) ^ kPolyReflected : crc >> 1;
    }
    table[i] = crc;
  }
  return table;
}

constexpr auto kTable = MakeTable();

}  // namespace

std::uint64_t Crc64(std::span<const std::uint8_t> bytes) {
  std::uint64_t crc = ~0ULL;
  for (std::uint8_t b : bytes) {
    crc = kTable[(crc ^ b) & 0xFF] ^ (crc >> 8);
  }
  return ~crc;
}

std::uint64_t Crc64(std::string_view text) {
  return Crc64(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace crowdmw

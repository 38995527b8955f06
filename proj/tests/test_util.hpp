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

#include <gtest/gtest.h>

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "crowdmw/domain.hpp"
#include "crowdmw/error.hpp"

namespace crowdmw::testing {

inline const char* kFixtureText =
    "man=1,man=3,man=4,man=2,woman=3,other=3,other=4,other=3,other=2,"
    "woman=1,woman=4,woman=2,woman=2,woman=3,woman=2,woman=4";

// True when fn throws crowdmw::Error with the given code.
inline bool ThrowsCode(const std::function<void()>& fn, ErrorCode code) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code() == code;
  }
  return false;
}

// Independent aggregation by brute force over (tag, room) tuples.
inline std::map<std::string, std::uint64_t> BruteVisitor(const std::vector<SensorReading>& rs) {
  std::map<std::string, std::uint64_t> out;
  const char* names[] = {"man", "woman", "other"};
  for (const char* name : names) {
    std::uint64_t sum = 0;
    bool seen = false;
    for (const auto& r : rs) {
      if (ToString(r.tag) == name) {
        sum += static_cast<std::uint64_t>(r.room.number);
        seen = true;
      }
    }
    if (seen) out[name] = sum;
  }
  return out;
}

inline std::map<std::string, std::uint64_t> BruteRoom(const std::vector<SensorReading>& rs,
                                                      int rooms = 4) {
  std::map<std::string, std::uint64_t> out;
  for (int room = 1; room <= rooms; ++room) {
    std::uint64_t n = 0;
    for (const auto& r : rs) n += r.room.number == room ? 1 : 0;
    if (n) out["Room" + std::to_string(room)] = n;
  }
  return out;
}

}  // namespace crowdmw::testing

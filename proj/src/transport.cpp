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

#include "crowdmw/transport.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "crowdmw/error.hpp"

namespace crowdmw {

std::string_view ToString(Backend backend) {
  return backend == Backend::kSimulated ? "sim" : "udp";
}

Backend ParseBackend(std::string_view token) {
  std::string lower(token);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "sim" || lower == "simulated") return Backend::kSimulated;
  if (lower == "udp") return Backend::kUdp;
  throw Error(ErrorCode::kConfigError, "unknown backend '" + std::string(token) + "'");
}

void NetConfig::Validate() const {
  if (!(loss_rate >= 0.0 && loss_rate <= 1.0)) {
    throw Error(ErrorCode::kConfigError, "loss_rate must be in [0,1]");
  }
  if (latency_min_ms < 0 || latency_min_ms > latency_max_ms) {
    throw Error(ErrorCode::kConfigError, "latency range must satisfy 0 <= min <= max");
  }
  if (service_ms < 0.0) throw Error(ErrorCode::kConfigError, "service_ms must be >= 0");
}

HostPort ParseHostPort(std::string_view address) {
  const auto colon = address.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == address.size()) {
    throw Error(ErrorCode::kInvalidArgument, "expected host:port, got '" + std::string(address) + "'");
  }
  const std::string_view digits = address.substr(colon + 1);
  unsigned port = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || port == 0 || port > 65535) {
    throw Error(ErrorCode::kInvalidArgument, "bad port in '" + std::string(address) + "'");
  }
  return {std::string(address.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

}  // namespace crowdmw

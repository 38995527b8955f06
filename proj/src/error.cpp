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

#include "crowdmw/error.hpp"

namespace crowdmw {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownTag: return "UnknownTag";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kNoClients: return "NoClients";
    case ErrorCode::kChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::kModeMismatch: return "ModeMismatch";
    case ErrorCode::kAddressConflict: return "AddressConflict";
    case ErrorCode::kEmptyRegistry: return "EmptyRegistry";
    case ErrorCode::kOverrideNotLive: return "OverrideNotLive";
    case ErrorCode::kPayloadTooLarge: return "PayloadTooLarge";
    case ErrorCode::kMalformed: return "Malformed";
    case ErrorCode::kEndpointClosed: return "EndpointClosed";
    case ErrorCode::kStorageFailure: return "StorageFailure";
    case ErrorCode::kConflictingCommit: return "ConflictingCommit";
    case ErrorCode::kIntegrityFailure: return "IntegrityFailure";
    case ErrorCode::kLeaderUnknown: return "LeaderUnknown";
    case ErrorCode::kUnknownFixture: return "UnknownFixture";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kScenarioDeadlock: return "ScenarioDeadlock";
    case ErrorCode::kIoFailure: return "IoFailure";
  }
  return "Unknown";
}

}  // namespace crowdmw

// Copyright 2026 The fmcts Authors
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

#include "fmcts/errors.hpp"

namespace fmcts {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kInvalidDistribution: return "invalid distribution";
    case ErrorCode::kBranchingCap: return "branching cap exceeded";
    case ErrorCode::kNumericFault: return "numeric fault";
    case ErrorCode::kDuplicateChild: return "duplicate child";
    case ErrorCode::kEpisodeTerminated: return "episode terminated";
    case ErrorCode::kInsufficientLookahead: return "insufficient lookahead";
    case ErrorCode::kUnknownEnvironment: return "unknown environment";
    case ErrorCode::kConfig: return "configuration error";
    case ErrorCode::kIo: return "i/o error";
  }
  return "unknown error";
}

BranchingCapError::BranchingCapError(std::uint64_t size, std::uint64_t cap)
    : Error(ErrorCode::kBranchingCap,
            "abstract action space of size " + std::to_string(size) +
                " exceeds branching cap " + std::to_string(cap)),
      size_(size),
      cap_(cap) {}

void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace fmcts

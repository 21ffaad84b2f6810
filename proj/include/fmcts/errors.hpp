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

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fmcts {

enum class ErrorCode {
  kInvalidArgument,
  kInvalidDistribution,
  kBranchingCap,
  kNumericFault,
  kDuplicateChild,
  kEpisodeTerminated,
  kInsufficientLookahead,
  kUnknownEnvironment,
  kConfig,
  kIo,
};

const char* to_string(ErrorCode code);

// Every failure raised by the library derives from Error and carries a code
// that the C API maps onto its status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class BranchingCapError : public Error {
 public:
  BranchingCapError(std::uint64_t size, std::uint64_t cap);
  std::uint64_t size() const noexcept { return size_; }
  std::uint64_t cap() const noexcept { return cap_; }

 private:
  std::uint64_t size_;
  std::uint64_t cap_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorCode::kInvalidArgument, what);
}

}  // namespace fmcts

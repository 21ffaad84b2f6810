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

// Checkpoint file layout (all integers little-endian):
//
//   bytes 0..7    magic "FMCTSCKP"
//   u32           format version
//   u64           manifest length in bytes
//   manifest      UTF-8 JSON: {"format_version", "tensors": [{"name",
//                 "shape", "offset", "count"}], "metadata": {...}}
//   payload       flat float32 values; "offset" is a byte offset into it
//
// Reading back a written checkpoint reproduces every float bit-for-bit.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace fmcts {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct CheckpointTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> data;
};

struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<CheckpointTensor> tensors;

  const CheckpointTensor& tensor(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace fmcts

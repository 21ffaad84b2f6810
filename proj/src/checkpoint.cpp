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

#include "fmcts/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "fmcts/errors.hpp"

namespace fmcts {
namespace {

constexpr std::array<char, 8> kMagic = {'F', 'M', 'C', 'T', 'S', 'C', 'K', 'P'};

template <typename U>
void put_le(std::ostream& out, U value) {
  std::array<unsigned char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

template <typename U>
U get_le(std::istream& in) {
  std::array<unsigned char, sizeof(U)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) fail(ErrorCode::kIo, "truncated checkpoint header");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(bytes[i]) << (8 * i);
  }
  return value;
}

std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

}  // namespace

const CheckpointTensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  fail(ErrorCode::kIo, "checkpoint has no tensor named " + name);
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  manifest["metadata"] = ckpt.metadata;
  manifest["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    if (product(t.shape) != t.data.size()) {
      fail(ErrorCode::kInvalidArgument, "tensor " + t.name + " shape does not match data");
    }
    manifest["tensors"].push_back(
        {{"name", t.name}, {"shape", t.shape}, {"offset", offset}, {"count", t.data.size()}});
    offset += t.data.size() * sizeof(float);
  }
  const std::string text = manifest.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kCheckpointFormatVersion);
  put_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : ckpt.tensors) {
    for (float f : t.data) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
  }
  if (!out) fail(ErrorCode::kIo, "failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) fail(ErrorCode::kIo, path.string() + " is not a checkpoint");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCheckpointFormatVersion) {
    fail(ErrorCode::kIo, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto length = get_le<std::uint64_t>(in);
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) fail(ErrorCode::kIo, "truncated checkpoint manifest");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kIo, std::string("corrupt checkpoint manifest: ") + e.what());
  }
  Checkpoint ckpt;
  ckpt.metadata = manifest.value("metadata", nlohmann::json::object());

  std::vector<char> payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  for (const auto& entry : manifest.at("tensors")) {
    CheckpointTensor t;
    t.name = entry.at("name").get<std::string>();
    t.shape = entry.at("shape").get<std::vector<std::size_t>>();
    const auto offset = entry.at("offset").get<std::uint64_t>();
    const auto count = entry.at("count").get<std::uint64_t>();
    if (count != product(t.shape) || offset + count * sizeof(float) > payload.size()) {
      fail(ErrorCode::kIo, "checkpoint tensor " + t.name + " out of bounds");
    }
    t.data.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      std::uint32_t bits = 0;
      for (std::size_t b = 0; b < 4; ++b) {
        bits |= static_cast<std::uint32_t>(
                    static_cast<unsigned char>(payload[offset + 4 * i + b]))
                << (8 * b);
      }
      t.data[i] = std::bit_cast<float>(bits);
    }
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

}  // namespace fmcts

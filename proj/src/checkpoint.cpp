// Copyright 2026 The VAVL Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vavl/checkpoint.hpp"

#include <algorithm>
#include <fstream>

#include "vavl/binary_io.hpp"

namespace vavl::num {
namespace {

constexpr char kMagic[4] = {'V', 'A', 'V', 'C'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(os.good(), ErrorCode::kIo, "cannot open checkpoint for writing: " + path.string());
  os.write(kMagic, 4);
  io::put_u32(os, kVersion);
  io::put_u64(os, checkpoint.metadata_json.size());
  os.write(checkpoint.metadata_json.data(),
           static_cast<std::streamsize>(checkpoint.metadata_json.size()));
  io::put_u32(os, static_cast<std::uint32_t>(checkpoint.entries.size()));
  for (const auto& entry : checkpoint.entries) {
    io::put_u32(os, static_cast<std::uint32_t>(entry.key.size()));
    os.write(entry.key.data(), static_cast<std::streamsize>(entry.key.size()));
    io::put_u32(os, static_cast<std::uint32_t>(entry.value.shape.size()));
    for (std::size_t d : entry.value.shape) io::put_u64(os, d);
    for (float v : entry.value.data) io::put_f32(os, v);
  }
  require(os.good(), ErrorCode::kIo, "failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), ErrorCode::kIo, "cannot open checkpoint: " + path.string());
  const std::string what = "checkpoint " + path.string();
  char magic[4];
  require(io::get_bytes(is, magic, 4) && std::equal(magic, magic + 4, kMagic), ErrorCode::kFormat,
          what + ": bad magic");
  require(io::get_u32(is, what) == kVersion, ErrorCode::kFormat, what + ": unsupported version");
  Checkpoint checkpoint;
  const std::uint64_t json_len = io::get_u64(is, what);
  checkpoint.metadata_json.resize(json_len);
  require(io::get_bytes(is, checkpoint.metadata_json.data(), json_len), ErrorCode::kFormat,
          what + ": truncated metadata");
  const std::uint32_t count = io::get_u32(is, what);
  for (std::uint32_t n = 0; n < count; ++n) {
    CheckpointEntry entry;
    entry.key.resize(io::get_u32(is, what));
    require(io::get_bytes(is, entry.key.data(), entry.key.size()), ErrorCode::kFormat,
            what + ": truncated key");
    const std::uint32_t ndim = io::get_u32(is, what);
    Shape shape(ndim);
    for (auto& d : shape) d = io::get_u64(is, what);
    std::vector<unsigned char> raw(numel(shape) * 4);
    require(io::get_bytes(is, raw.data(), raw.size()), ErrorCode::kFormat,
            what + ": truncated payload for " + entry.key);
    std::vector<float> values(numel(shape));
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = io::f32_from_le(&raw[4 * i]);
    entry.value = Tensor<float>(std::move(shape), std::move(values));
    checkpoint.entries.push_back(std::move(entry));
  }
  return checkpoint;
}

}  // namespace vavl::num

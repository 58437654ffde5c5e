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

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vavl/tensor.hpp"

namespace vavl::num {

// Checkpoint archive layout (little-endian):
//   "VAVC" | u32 version=1 | u64 json_len | json bytes | u32 entry_count
//   per entry: u32 key_len | key | u32 ndim | u64 dims[ndim] | f32 payload
// Keys are "group/param-name". The JSON blob holds the model configuration
// and training metadata.
struct CheckpointEntry {
  std::string key;
  Tensor<float> value;
};

struct Checkpoint {
  std::string metadata_json;
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry* find(const std::string& key) const {
    for (const auto& e : entries)
      if (e.key == key) return &e;
    return nullptr;
  }
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vavl::num

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

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace vavl::data {

enum class Modality { kAcoustic, kVisual };
enum class Task { kClassification, kRegression };
enum class Presence { kPaired, kAudioOnly, kVideoOnly };
enum class Split { kTrain, kDev, kTest };

std::string to_string(Modality m);
std::string to_string(Task t);
std::string to_string(Presence p);
std::string to_string(Split s);
Task task_from_string(const std::string& s);

inline constexpr std::size_t kDefaultAcousticDim = 1024;
inline constexpr std::size_t kDefaultVisualDim = 1408;

// T x D frame matrix of one modality, row-major.
struct FeatureSequence {
  Modality modality = Modality::kAcoustic;
  std::size_t frames = 0;
  std::size_t dim = 0;
  std::vector<float> values;

  const float* frame(std::size_t t) const { return values.data() + t * dim; }

  // Throws unless T >= 1, the payload is T*D, every entry is finite and, when
  // expected_dim is non-zero, D == expected_dim.
  void validate(std::size_t expected_dim = 0) const;
};

struct Categorical {
  int class_index = 0;
  int num_classes = 0;
};

// Arousal, valence, dominance.
struct Attributes {
  std::array<double, 3> values{};
};

using EmotionTarget = std::variant<Categorical, Attributes>;

void validate_target(const EmotionTarget& target);

struct Sample {
  std::string id;
  std::string speaker;
  std::optional<FeatureSequence> audio;
  std::optional<FeatureSequence> video;
  EmotionTarget target;

  Presence presence() const;
};

struct Dataset {
  Task task = Task::kClassification;
  int num_classes = 0;  // classification only
  std::size_t acoustic_dim = kDefaultAcousticDim;
  std::size_t visual_dim = kDefaultVisualDim;
  std::vector<Sample> samples;
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t size() const { return samples.size(); }
  std::vector<std::string> speakers() const;  // sorted, unique
};

// Expected per-modality feature widths; zero means "take from the first
// file seen and require all others to agree".
struct DimConfig {
  std::size_t acoustic = 0;
  std::size_t visual = 0;
};

// Feature file: "VAVF" | u32 version=1 | u32 T | u32 D | T*D f32, little-endian.
void write_feature_file(const std::filesystem::path& path, const FeatureSequence& seq);
FeatureSequence read_feature_file(const std::filesystem::path& path, Modality modality);

// Manifest JSON; feature paths are resolved relative to the manifest's directory.
Dataset load_manifest(const std::filesystem::path& path, DimConfig dims = {});

// Writes `<dir>/manifest.json` plus one feature file per present modality
// under `<dir>/features/`. Returns the manifest path.
std::filesystem::path write_dataset(const std::filesystem::path& dir, const Dataset& dataset);

struct SplitRatios {
  double train = 0.70;
  double dev = 0.15;
  double test = 0.15;
};

struct SplitAssignment {
  std::map<std::string, Split> by_id;

  Split at(const std::string& id) const;
  // Dataset indices of the split, in dataset order.
  std::vector<std::size_t> indices(const Dataset& dataset, Split split) const;
};

// Speaker-independent partition. Speakers are shuffled by `seed` and then
// assigned greedily to the split furthest below its target sample count,
// reserving speakers so that no split ends up empty.
SplitAssignment make_splits(const Dataset& dataset, SplitRatios ratios, std::uint64_t seed);

// Zero-padded batch x max_len x dim block.
struct PaddedFrames {
  std::size_t batch = 0;
  std::size_t max_len = 0;
  std::size_t dim = 0;
  std::vector<std::size_t> lengths;
  std::vector<float> values;

  bool empty() const { return batch == 0; }
};

PaddedFrames pad_sequences(std::span<const FeatureSequence* const> seqs);

struct Batch {
  Presence presence = Presence::kPaired;
  std::vector<std::string> ids;
  PaddedFrames audio;  // empty for kVideoOnly
  PaddedFrames video;  // empty for kAudioOnly
  std::vector<EmotionTarget> targets;

  std::size_t size() const { return ids.size(); }
};

// One epoch over `indices`: samples are grouped by presence pattern,
// shuffled within each group, cut into batches of at most batch_size, and
// the batch order is shuffled. Depends only on (seed, epoch).
std::vector<Batch> batch_epoch(const Dataset& dataset, std::span<const std::size_t> indices,
                               std::size_t batch_size, std::uint64_t seed, std::uint64_t epoch);

Batch make_batch(const Dataset& dataset, std::span<const std::size_t> indices);

enum class SynthEncoding {
  kRedundant,  // both modalities carry the full target
  kSplit,      // each modality alone is uninformative; the pair determines it
};

struct SynthSpec {
  std::size_t num_samples = 200;
  std::size_t num_speakers = 10;
  std::size_t min_frames = 6;
  std::size_t max_frames = 12;
  std::size_t acoustic_dim = 16;
  std::size_t visual_dim = 16;
  Task task = Task::kClassification;
  int num_classes = 4;
  double signal_acoustic = 1.0;  // mean-shift amplitude
  double signal_visual = 1.0;
  double noise = 0.5;  // per-entry Gaussian std
  double frac_paired = 1.0;
  double frac_audio_only = 0.0;
  double frac_video_only = 0.0;
  SynthEncoding encoding = SynthEncoding::kRedundant;

  // First signal coordinate per modality; acoustic uses [0, k), visual
  // uses [visual_dim / 2, visual_dim / 2 + k).
  std::size_t visual_signal_offset() const { return visual_dim / 2; }
};

nlohmann::json to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const nlohmann::json& j);

// Targets are encoded as additive mean shifts in designated coordinates of
// each present modality plus i.i.d. Gaussian noise. Deterministic in seed.
Dataset generate_synthetic(const SynthSpec& spec, std::uint64_t seed);

}  // namespace vavl::data

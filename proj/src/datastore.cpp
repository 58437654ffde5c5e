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

#include "vavl/datastore.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "vavl/binary_io.hpp"
#include "vavl/error.hpp"
#include "vavl/rng.hpp"

namespace vavl::data {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kFeatureMagic[4] = {'V', 'A', 'V', 'F'};
constexpr std::uint32_t kFeatureVersion = 1;

std::size_t& dim_slot(DimConfig& dims, Modality m) {
  return m == Modality::kAcoustic ? dims.acoustic : dims.visual;
}

std::optional<FeatureSequence> load_optional(const json& entry, const char* key,
                                             const fs::path& base, Modality modality,
                                             DimConfig& dims) {
  if (!entry.contains(key) || entry[key].is_null()) return std::nullopt;
  FeatureSequence seq = read_feature_file(base / entry[key].get<std::string>(), modality);
  std::size_t& expected = dim_slot(dims, modality);
  if (expected == 0) expected = seq.dim;
  require(seq.dim == expected, ErrorCode::kShapeMismatch,
          "dimension mismatch in " + entry[key].get<std::string>() + ": expected " +
              std::to_string(expected) + ", found " + std::to_string(seq.dim));
  return seq;
}

}  // namespace

std::string to_string(Modality m) { return m == Modality::kAcoustic ? "acoustic" : "visual"; }

std::string to_string(Task t) {
  return t == Task::kClassification ? "classification" : "regression";
}

std::string to_string(Presence p) {
  switch (p) {
    case Presence::kPaired: return "paired";
    case Presence::kAudioOnly: return "audio_only";
    case Presence::kVideoOnly: return "video_only";
  }
  return "unknown";
}

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "unknown";
}

Task task_from_string(const std::string& s) {
  if (s == "classification") return Task::kClassification;
  if (s == "regression") return Task::kRegression;
  fail(ErrorCode::kFormat, "unknown task: " + s);
}

void FeatureSequence::validate(std::size_t expected_dim) const {
  require(frames >= 1, ErrorCode::kFormat, "feature sequence has no frames");
  require(dim >= 1 && values.size() == frames * dim, ErrorCode::kFormat,
          "feature payload does not match T x D");
  require(expected_dim == 0 || dim == expected_dim, ErrorCode::kShapeMismatch,
          "feature dimension " + std::to_string(dim) + " does not match configured " +
              std::to_string(expected_dim));
  for (float v : values)
    require(std::isfinite(v), ErrorCode::kFormat, "non-finite feature value");
}

void validate_target(const EmotionTarget& target) {
  if (const auto* c = std::get_if<Categorical>(&target)) {
    require(c->num_classes >= 2 && c->class_index >= 0 && c->class_index < c->num_classes,
            ErrorCode::kInvalidArgument, "class index out of range");
  } else {
    for (double v : std::get<Attributes>(target).values)
      require(std::isfinite(v), ErrorCode::kInvalidArgument, "non-finite attribute target");
  }
}

Presence Sample::presence() const {
  require(audio || video, ErrorCode::kInvalidArgument, "empty sample: " + id);
  if (audio && video) return Presence::kPaired;
  return audio ? Presence::kAudioOnly : Presence::kVideoOnly;
}

std::vector<std::string> Dataset::speakers() const {
  std::set<std::string> unique;
  for (const auto& s : samples) unique.insert(s.speaker);
  return {unique.begin(), unique.end()};
}

void write_feature_file(const fs::path& path, const FeatureSequence& seq) {
  seq.validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(os.good(), ErrorCode::kIo, "cannot write feature file: " + path.string());
  os.write(kFeatureMagic, 4);
  io::put_u32(os, kFeatureVersion);
  io::put_u32(os, static_cast<std::uint32_t>(seq.frames));
  io::put_u32(os, static_cast<std::uint32_t>(seq.dim));
  for (float v : seq.values) io::put_f32(os, v);
  require(os.good(), ErrorCode::kIo, "failed writing feature file: " + path.string());
}

FeatureSequence read_feature_file(const fs::path& path, Modality modality) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), ErrorCode::kIo, "missing feature file: " + path.string());
  const std::string what = "feature file " + path.string();
  char magic[4];
  require(io::get_bytes(is, magic, 4) && std::equal(magic, magic + 4, kFeatureMagic),
          ErrorCode::kFormat, what + ": malformed header (bad magic)");
  require(io::get_u32(is, what) == kFeatureVersion, ErrorCode::kFormat,
          what + ": malformed header (unsupported version)");
  FeatureSequence seq;
  seq.modality = modality;
  seq.frames = io::get_u32(is, what);
  seq.dim = io::get_u32(is, what);
  require(seq.frames >= 1 && seq.dim >= 1, ErrorCode::kFormat,
          what + ": malformed header (zero T or D)");
  std::vector<unsigned char> raw(seq.frames * seq.dim * 4);
  require(io::get_bytes(is, raw.data(), raw.size()), ErrorCode::kFormat,
          what + ": truncated payload");
  char extra;
  require(!is.read(&extra, 1), ErrorCode::kFormat, what + ": trailing bytes after payload");
  seq.values.resize(seq.frames * seq.dim);
  for (std::size_t i = 0; i < seq.values.size(); ++i) seq.values[i] = io::f32_from_le(&raw[4 * i]);
  seq.validate();
  return seq;
}

Dataset load_manifest(const fs::path& path, DimConfig dims) {
  std::ifstream is(path);
  require(is.good(), ErrorCode::kIo, "missing manifest: " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, "malformed manifest " + path.string() + ": " + e.what());
  }
  const fs::path base = path.parent_path();
  Dataset ds;
  try {
    ds.task = task_from_string(j.at("task").get<std::string>());
    if (ds.task == Task::kClassification) ds.num_classes = j.at("num_classes").get<int>();
    if (j.contains("metadata")) ds.metadata = j["metadata"];
    for (const auto& entry : j.at("samples")) {
      Sample s;
      s.id = entry.at("id").get<std::string>();
      s.speaker = entry.at("speaker").get<std::string>();
      s.audio = load_optional(entry, "audio_path", base, Modality::kAcoustic, dims);
      s.video = load_optional(entry, "video_path", base, Modality::kVisual, dims);
      require(s.audio || s.video, ErrorCode::kInvalidArgument, "empty sample: " + s.id);
      const json& target = entry.at("target");
      if (ds.task == Task::kClassification) {
        s.target = Categorical{target.get<int>(), ds.num_classes};
      } else {
        require(target.is_array() && target.size() == 3, ErrorCode::kFormat,
                "regression target must be [arousal, valence, dominance]: " + s.id);
        s.target = Attributes{{target[0].get<double>(), target[1].get<double>(),
                               target[2].get<double>()}};
      }
      validate_target(s.target);
      ds.samples.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, "malformed manifest " + path.string() + ": " + e.what());
  }
  std::set<std::string> ids;
  for (const auto& s : ds.samples)
    require(ids.insert(s.id).second, ErrorCode::kFormat, "duplicate sample id: " + s.id);
  ds.acoustic_dim = dims.acoustic ? dims.acoustic : kDefaultAcousticDim;
  ds.visual_dim = dims.visual ? dims.visual : kDefaultVisualDim;
  return ds;
}

fs::path write_dataset(const fs::path& dir, const Dataset& dataset) {
  fs::create_directories(dir / "features");
  json samples = json::array();
  for (const auto& s : dataset.samples) {
    json entry;
    entry["id"] = s.id;
    entry["speaker"] = s.speaker;
    entry["audio_path"] = nullptr;
    entry["video_path"] = nullptr;
    if (s.audio) {
      const std::string rel = "features/" + s.id + ".a.vavf";
      write_feature_file(dir / rel, *s.audio);
      entry["audio_path"] = rel;
    }
    if (s.video) {
      const std::string rel = "features/" + s.id + ".v.vavf";
      write_feature_file(dir / rel, *s.video);
      entry["video_path"] = rel;
    }
    if (const auto* c = std::get_if<Categorical>(&s.target)) {
      entry["target"] = c->class_index;
    } else {
      const auto& a = std::get<Attributes>(s.target).values;
      entry["target"] = {a[0], a[1], a[2]};
    }
    samples.push_back(std::move(entry));
  }
  json manifest;
  manifest["task"] = to_string(dataset.task);
  if (dataset.task == Task::kClassification) manifest["num_classes"] = dataset.num_classes;
  manifest["samples"] = std::move(samples);
  if (!dataset.metadata.empty()) manifest["metadata"] = dataset.metadata;
  const fs::path path = dir / "manifest.json";
  std::ofstream os(path, std::ios::trunc);
  require(os.good(), ErrorCode::kIo, "cannot write manifest: " + path.string());
  os << manifest.dump(2) << '\n';
  return path;
}

Split SplitAssignment::at(const std::string& id) const {
  auto it = by_id.find(id);
  require(it != by_id.end(), ErrorCode::kInvalidArgument, "sample not in split assignment: " + id);
  return it->second;
}

std::vector<std::size_t> SplitAssignment::indices(const Dataset& dataset, Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i)
    if (at(dataset.samples[i].id) == split) out.push_back(i);
  return out;
}

SplitAssignment make_splits(const Dataset& dataset, SplitRatios ratios, std::uint64_t seed) {
  const std::array<double, 3> r{ratios.train, ratios.dev, ratios.test};
  for (double v : r) require(v > 0.0, ErrorCode::kInvalidArgument, "split ratios must be positive");
  require(std::abs(r[0] + r[1] + r[2] - 1.0) < 1e-9, ErrorCode::kInvalidArgument,
          "split ratios must sum to 1");

  std::map<std::string, std::size_t> per_speaker;
  for (const auto& s : dataset.samples) ++per_speaker[s.speaker];
  require(per_speaker.size() >= 3, ErrorCode::kInvalidArgument,
          "speaker-independent splits need at least 3 speakers, found " +
              std::to_string(per_speaker.size()));

  std::vector<std::string> speakers;
  for (const auto& [name, count] : per_speaker) speakers.push_back(name);
  Rng rng(mix_seed(seed, 0x5b1175));
  rng.shuffle(speakers);

  const double total = static_cast<double>(dataset.samples.size());
  std::array<double, 3> filled{0, 0, 0};
  std::array<std::size_t, 3> speaker_count{0, 0, 0};
  std::map<std::string, Split> speaker_split;
  for (std::size_t i = 0; i < speakers.size(); ++i) {
    const std::size_t remaining = speakers.size() - i;
    std::size_t empty = 0;
    for (auto c : speaker_count) empty += c == 0;
    int best = -1;
    double best_deficit = -1e300;
    for (int k = 0; k < 3; ++k) {
      if (remaining <= empty && speaker_count[k] != 0) continue;
      const double deficit = r[k] * total - filled[k];
      if (deficit > best_deficit) {
        best_deficit = deficit;
        best = k;
      }
    }
    const auto n = static_cast<double>(per_speaker[speakers[i]]);
    filled[best] += n;
    ++speaker_count[best];
    speaker_split[speakers[i]] = static_cast<Split>(best);
  }

  SplitAssignment out;
  for (const auto& s : dataset.samples) out.by_id[s.id] = speaker_split.at(s.speaker);
  return out;
}

PaddedFrames pad_sequences(std::span<const FeatureSequence* const> seqs) {
  PaddedFrames out;
  if (seqs.empty()) return out;
  out.batch = seqs.size();
  out.dim = seqs.front()->dim;
  for (const auto* s : seqs) {
    require(s->dim == out.dim, ErrorCode::kShapeMismatch, "pad_sequences: mixed feature dims");
    out.lengths.push_back(s->frames);
    out.max_len = std::max(out.max_len, s->frames);
  }
  out.values.assign(out.batch * out.max_len * out.dim, 0.0f);
  for (std::size_t b = 0; b < seqs.size(); ++b)
    std::copy(seqs[b]->values.begin(), seqs[b]->values.end(),
              out.values.begin() + static_cast<std::ptrdiff_t>(b * out.max_len * out.dim));
  return out;
}

Batch make_batch(const Dataset& dataset, std::span<const std::size_t> indices) {
  require(!indices.empty(), ErrorCode::kInvalidArgument, "make_batch: no samples");
  Batch batch;
  batch.presence = dataset.samples.at(indices.front()).presence();
  std::vector<const FeatureSequence*> audio, video;
  for (std::size_t i : indices) {
    const Sample& s = dataset.samples.at(i);
    require(s.presence() == batch.presence, ErrorCode::kInvalidArgument,
            "make_batch: mixed presence patterns");
    batch.ids.push_back(s.id);
    batch.targets.push_back(s.target);
    if (s.audio) audio.push_back(&*s.audio);
    if (s.video) video.push_back(&*s.video);
  }
  batch.audio = pad_sequences(audio);
  batch.video = pad_sequences(video);
  return batch;
}

std::vector<Batch> batch_epoch(const Dataset& dataset, std::span<const std::size_t> indices,
                               std::size_t batch_size, std::uint64_t seed, std::uint64_t epoch) {
  require(batch_size >= 1, ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  require(!indices.empty(), ErrorCode::kInvalidArgument, "empty split");
  Rng rng(mix_seed(seed, epoch));
  std::array<std::vector<std::size_t>, 3> groups;
  for (std::size_t i : indices)
    groups[static_cast<int>(dataset.samples.at(i).presence())].push_back(i);

  std::vector<std::vector<std::size_t>> chunks;
  for (auto& group : groups) {
    rng.shuffle(group);
    for (std::size_t start = 0; start < group.size(); start += batch_size) {
      const std::size_t end = std::min(group.size(), start + batch_size);
      chunks.emplace_back(group.begin() + static_cast<std::ptrdiff_t>(start),
                          group.begin() + static_cast<std::ptrdiff_t>(end));
    }
  }
  rng.shuffle(chunks);
  std::vector<Batch> batches;
  batches.reserve(chunks.size());
  for (const auto& chunk : chunks) batches.push_back(make_batch(dataset, chunk));
  return batches;
}

namespace {

SynthEncoding encoding_from_string(const std::string& s) {
  if (s == "redundant") return SynthEncoding::kRedundant;
  if (s == "split") return SynthEncoding::kSplit;
  fail(ErrorCode::kFormat, "unknown synthetic encoding: " + s);
}

FeatureSequence synth_sequence(Modality modality, std::size_t frames, std::size_t dim,
                               std::size_t offset, const std::vector<double>& pattern,
                               double noise, Rng& rng) {
  FeatureSequence seq{modality, frames, dim, std::vector<float>(frames * dim)};
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t j = 0; j < dim; ++j) {
      double v = noise * rng.normal();
      if (j >= offset && j - offset < pattern.size()) v += pattern[j - offset];
      seq.values[t * dim + j] = static_cast<float>(v);
    }
  return seq;
}

}  // namespace

json to_json(const SynthSpec& spec) {
  return json{{"num_samples", spec.num_samples},
              {"num_speakers", spec.num_speakers},
              {"min_frames", spec.min_frames},
              {"max_frames", spec.max_frames},
              {"acoustic_dim", spec.acoustic_dim},
              {"visual_dim", spec.visual_dim},
              {"task", to_string(spec.task)},
              {"num_classes", spec.num_classes},
              {"signal_acoustic", spec.signal_acoustic},
              {"signal_visual", spec.signal_visual},
              {"noise", spec.noise},
              {"frac_paired", spec.frac_paired},
              {"frac_audio_only", spec.frac_audio_only},
              {"frac_video_only", spec.frac_video_only},
              {"encoding", spec.encoding == SynthEncoding::kRedundant ? "redundant" : "split"}};
}

SynthSpec synth_spec_from_json(const json& j) {
  SynthSpec s;
  try {
    s.num_samples = j.value("num_samples", s.num_samples);
    s.num_speakers = j.value("num_speakers", s.num_speakers);
    s.min_frames = j.value("min_frames", s.min_frames);
    s.max_frames = j.value("max_frames", s.max_frames);
    s.acoustic_dim = j.value("acoustic_dim", s.acoustic_dim);
    s.visual_dim = j.value("visual_dim", s.visual_dim);
    if (j.contains("task")) s.task = task_from_string(j["task"].get<std::string>());
    s.num_classes = j.value("num_classes", s.num_classes);
    s.signal_acoustic = j.value("signal_acoustic", s.signal_acoustic);
    s.signal_visual = j.value("signal_visual", s.signal_visual);
    s.noise = j.value("noise", s.noise);
    s.frac_paired = j.value("frac_paired", s.frac_paired);
    s.frac_audio_only = j.value("frac_audio_only", s.frac_audio_only);
    s.frac_video_only = j.value("frac_video_only", s.frac_video_only);
    if (j.contains("encoding")) s.encoding = encoding_from_string(j["encoding"].get<std::string>());
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("malformed synth spec: ") + e.what());
  }
  return s;
}

Dataset generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  const double frac_sum = spec.frac_paired + spec.frac_audio_only + spec.frac_video_only;
  require(std::abs(frac_sum - 1.0) < 1e-9 && spec.frac_paired >= 0 && spec.frac_audio_only >= 0 &&
              spec.frac_video_only >= 0,
          ErrorCode::kInvalidArgument, "presence fractions must be non-negative and sum to 1");
  require(spec.num_samples >= 1 && spec.num_speakers >= 1, ErrorCode::kInvalidArgument,
          "synthetic dataset needs samples and speakers");
  require(spec.min_frames >= 1 && spec.min_frames <= spec.max_frames,
          ErrorCode::kInvalidArgument, "invalid frame range");
  const std::size_t code_width =
      spec.task == Task::kClassification ? static_cast<std::size_t>(spec.num_classes) : 3;
  require(spec.task == Task::kRegression || spec.num_classes >= 2, ErrorCode::kInvalidArgument,
          "classification needs at least 2 classes");
  require(code_width <= spec.acoustic_dim && code_width <= spec.visual_dim - spec.visual_signal_offset(),
          ErrorCode::kInvalidArgument, "feature dims too small for the signal pattern");

  Rng rng(seed);
  const std::size_t n = spec.num_samples;
  const auto n_paired = static_cast<std::size_t>(std::llround(spec.frac_paired * double(n)));
  const auto n_audio = std::min(
      n - n_paired, static_cast<std::size_t>(std::llround(spec.frac_audio_only * double(n))));
  std::vector<Presence> presence(n, Presence::kVideoOnly);
  std::fill_n(presence.begin(), n_paired, Presence::kPaired);
  std::fill_n(presence.begin() + static_cast<std::ptrdiff_t>(n_paired), n_audio,
              Presence::kAudioOnly);
  rng.shuffle(presence);

  Dataset ds;
  ds.task = spec.task;
  ds.num_classes = spec.task == Task::kClassification ? spec.num_classes : 0;
  ds.acoustic_dim = spec.acoustic_dim;
  ds.visual_dim = spec.visual_dim;
  ds.metadata = json{{"generator", "synthetic"}, {"seed", seed}, {"spec", to_json(spec)}};

  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    char id[32];
    std::snprintf(id, sizeof id, "s%05zu", i);
    s.id = id;
    s.speaker = "spk" + std::to_string(i % spec.num_speakers);

    std::vector<double> pattern_a(code_width, 0.0), pattern_v(code_width, 0.0);
    if (spec.task == Task::kClassification) {
      const auto m = static_cast<std::uint64_t>(spec.num_classes);
      const auto label = rng.below(m);
      std::uint64_t code_a = label, code_v = label;
      if (spec.encoding == SynthEncoding::kSplit) {
        code_a = rng.below(m);
        code_v = (label + m - code_a) % m;
      }
      pattern_a[code_a] = spec.signal_acoustic;
      pattern_v[code_v] = spec.signal_visual;
      s.target = Categorical{static_cast<int>(label), spec.num_classes};
    } else {
      Attributes attrs;
      for (std::size_t k = 0; k < 3; ++k) {
        const double za = rng.normal();
        const double zv = spec.encoding == SynthEncoding::kSplit ? rng.normal() : za;
        pattern_a[k] = spec.signal_acoustic * za;
        pattern_v[k] = spec.signal_visual * zv;
        attrs.values[k] = spec.encoding == SynthEncoding::kSplit ? za + zv : za;
      }
      s.target = attrs;
    }

    const std::size_t span = spec.max_frames - spec.min_frames + 1;
    if (presence[i] != Presence::kVideoOnly) {
      const std::size_t t = spec.min_frames + rng.below(span);
      s.audio = synth_sequence(Modality::kAcoustic, t, spec.acoustic_dim, 0, pattern_a,
                               spec.noise, rng);
    }
    if (presence[i] != Presence::kAudioOnly) {
      const std::size_t t = spec.min_frames + rng.below(span);
      s.video = synth_sequence(Modality::kVisual, t, spec.visual_dim, spec.visual_signal_offset(),
                               pattern_v, spec.noise, rng);
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace vavl::data

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
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vavl/checkpoint.hpp"
#include "vavl/conformer.hpp"
#include "vavl/datastore.hpp"

namespace vavl::model {

using num::GroupId;
using num::ParameterGroup;
using num::SeqLayout;
using num::Tensor;
using num::Var;

enum class Fusion { kAvHead, kAverageUnimodal };

// Which modalities a prediction was computed from.
enum class Condition { kAudioVisual, kAcoustic, kVisual };

std::string to_string(Fusion f);
std::string to_string(Condition c);
Condition condition_from_string(const std::string& s);

struct ModelConfig {
  nn::EncoderConfig encoder;
  data::Task task = data::Task::kClassification;
  int num_classes = 6;
  std::size_t head_hidden1 = 512;
  std::size_t head_hidden2 = 256;
  double head_dropout = 0.2;
  std::size_t acoustic_dim = data::kDefaultAcousticDim;  // also the recon width
  std::size_t visual_dim = data::kDefaultVisualDim;
  Fusion fusion = Fusion::kAvHead;
  bool use_residual = true;
  bool use_reconstruction = true;

  std::size_t output_dim() const {
    return task == data::Task::kClassification ? static_cast<std::size_t>(num_classes) : 3;
  }
  std::size_t input_dim(data::Modality m) const {
    return m == data::Modality::kAcoustic ? acoustic_dim : visual_dim;
  }
  void validate() const;

  // "base-50d": 50-wide encoders, fusion input 100.
  // "wide-512d": 512-wide encoders with 8 heads, fusion input 1024.
  // "toy": small widths for tests and CPU experiments.
  static ModelConfig preset(const std::string& name);
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Padded frames of one modality as a graph constant.
template <typename Real>
struct SequenceInput {
  Var<Real> frames;  // [B*T x D]
  SeqLayout layout;

  static SequenceInput from_padded(const data::PaddedFrames& padded);
  static SequenceInput from_sequence(const data::FeatureSequence& seq);
};

template <typename Real>
struct ForwardOutput {
  Var<Real> pred;              // [B x M] logits or [B x 3] attributes
  Var<Real> pooled_shared;     // [B x d_model]
  Tensor<Real> pooled_input;   // [B x D] mean of the raw frames
  Var<Real> recon;             // [B x D], null without reconstruction
};

// Captures the fusion head's input for instrumentation.
template <typename Real>
struct FusionProbe {
  Tensor<Real> fusion_input;
};

// Linear -> ReLU -> Dropout -> Linear -> ReLU -> Dropout -> Linear.
template <typename Real>
class Mlp {
 public:
  Mlp(nn::ParamFactory<Real> f, std::size_t in, std::size_t hidden1, std::size_t hidden2,
      std::size_t out, double dropout);
  Var<Real> operator()(const Var<Real>& x, const nn::ForwardContext& ctx) const;

 private:
  nn::Linear<Real> l1_, l2_, l3_;
  Real dropout_;
};

template <typename Real>
class VavlModel {
 public:
  VavlModel(ModelConfig config, std::uint64_t seed);
  VavlModel(VavlModel&&) noexcept = default;
  VavlModel& operator=(VavlModel&&) noexcept = default;
  VavlModel(const VavlModel&) = delete;
  VavlModel& operator=(const VavlModel&) = delete;

  const ModelConfig& config() const { return config_; }

  ParameterGroup<Real>& group(GroupId id) { return groups_[static_cast<int>(id)]; }
  const ParameterGroup<Real>& group(GroupId id) const { return groups_[static_cast<int>(id)]; }
  std::size_t parameter_count() const;
  std::set<std::string> parameter_names(GroupId id) const;

  // frontend -> positional encoding -> unimodal stack (u) -> shared stack (s)
  // -> r = s + u (or s) -> mean pool -> prediction / reconstruction heads.
  ForwardOutput<Real> forward_unimodal(data::Modality modality, const SequenceInput<Real>& input,
                                       const nn::ForwardContext& ctx) const;

  // Concatenated pooled shared embeddings through the fusion head.
  Var<Real> forward_audiovisual(const SequenceInput<Real>& audio, const SequenceInput<Real>& video,
                                const nn::ForwardContext& ctx,
                                FusionProbe<Real>* probe = nullptr) const;

  // Number of optimizer steps the fusion head has received.
  std::uint64_t fusion_updates() const { return fusion_updates_; }
  void set_fusion_updates(std::uint64_t n) { fusion_updates_ = n; }

  // Parameter values in group order; restore() expects the same layout.
  std::vector<Tensor<Real>> snapshot() const;
  void restore(const std::vector<Tensor<Real>>& values);

  num::Checkpoint to_checkpoint(const nlohmann::json& extra = nlohmann::json::object()) const;
  static VavlModel from_checkpoint(const num::Checkpoint& checkpoint);

 private:
  struct Branch {
    nn::Frontend<Real> frontend;
    nn::ConformerStack<Real> stack;
    Mlp<Real> head;
    std::optional<Mlp<Real>> recon;
  };

  const Branch& branch(data::Modality m) const {
    return m == data::Modality::kAcoustic ? *acoustic_ : *visual_;
  }

  ModelConfig config_;
  std::array<ParameterGroup<Real>, 4> groups_;
  std::optional<Branch> acoustic_;
  std::optional<Branch> visual_;
  std::optional<nn::ConformerStack<Real>> shared_;
  std::optional<Mlp<Real>> fusion_;
  std::uint64_t fusion_updates_ = 0;
};

// Classification: mean of the two softmax vectors. Regression: mean of the
// attribute vectors. Inputs are [B x K].
template <typename Real>
Tensor<Real> average_fusion(const Tensor<Real>& pred_a, const Tensor<Real>& pred_v, data::Task task);

struct Prediction {
  std::vector<double> output;  // logits, probabilities (average fusion) or attributes
  Condition condition = Condition::kAudioVisual;
  bool probabilities = false;

  int argmax() const;
};

// Inference routing: both modalities -> fusion path; otherwise the branch
// of the available modality. Evaluation mode, deterministic.
Prediction predict(const data::Sample& sample, const VavlModel<float>& model);

// Pooled shared-stack embedding of one modality, evaluation mode.
std::vector<double> shared_embedding(const data::FeatureSequence& seq,
                                     const VavlModel<float>& model);

}  // namespace vavl::model

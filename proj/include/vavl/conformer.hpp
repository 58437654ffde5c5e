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

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vavl/autograd.hpp"
#include "vavl/ops.hpp"
#include "vavl/rng.hpp"

namespace vavl::nn {

using num::ParameterGroup;
using num::SeqLayout;
using num::Tensor;
using num::Var;

struct EncoderConfig {
  std::size_t d_model = 50;
  std::size_t ffn_hidden = 512;
  std::size_t num_heads = 5;
  double dropout = 0.1;
  std::size_t conv_kernel = 7;      // depthwise kernel inside each block
  std::size_t frontend_kernel = 3;  // temporal kernel of the input projection
  std::size_t layers_acoustic = 3;
  std::size_t layers_visual = 3;
  std::size_t layers_shared = 2;

  void validate() const;
};

nlohmann::json to_json(const EncoderConfig& c);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

// Dropout is active only in training mode with an RNG attached.
struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;

  Rng* dropout_rng() const { return training ? rng : nullptr; }
  static ForwardContext eval() { return {}; }
  static ForwardContext train(Rng& r) { return {true, &r}; }
};

// Creates parameters in a group with deterministic initialization: linear
// weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero, norm gains one.
template <typename Real>
class ParamFactory {
 public:
  ParamFactory(ParameterGroup<Real>& group, std::string prefix, Rng& rng)
      : group_(&group), prefix_(std::move(prefix)), rng_(&rng) {}

  ParamFactory scoped(const std::string& name) const {
    return ParamFactory(*group_, prefix_ + name + ".", *rng_);
  }

  Var<Real> uniform(const std::string& name, num::Shape shape, std::size_t fan_in);
  Var<Real> constant(const std::string& name, num::Shape shape, Real value);

 private:
  ParameterGroup<Real>* group_;
  std::string prefix_;
  Rng* rng_;
};

template <typename Real>
struct Linear {
  Var<Real> weight;  // [in x out]
  Var<Real> bias;    // [out]

  Linear() = default;
  Linear(ParamFactory<Real> f, std::size_t in, std::size_t out);
  Var<Real> operator()(const Var<Real>& x) const { return num::linear(x, weight, bias); }
};

template <typename Real>
struct LayerNorm {
  Var<Real> gamma;
  Var<Real> beta;

  LayerNorm() = default;
  LayerNorm(ParamFactory<Real> f, std::size_t dim);
  Var<Real> operator()(const Var<Real>& x) const { return num::layer_norm(x, gamma, beta); }
};

// Masked temporal convolution from raw feature width to d_model.
template <typename Real>
class Frontend {
 public:
  Frontend(ParamFactory<Real> f, std::size_t input_dim, const EncoderConfig& config);

  std::size_t input_dim() const { return input_dim_; }

  // frames: [B*T x input_dim]. Output [B*T x d_model] with padded rows zero.
  Var<Real> project(const Var<Real>& frames, const SeqLayout& layout) const;

 private:
  std::size_t input_dim_;
  Var<Real> weight_;  // [K x input_dim x d_model]
  Var<Real> bias_;
};

// Half-step FFN -> MHSA -> convolution module -> half-step FFN -> LayerNorm,
// each sub-block residual. Padded rows of the output are zero.
template <typename Real>
class ConformerBlock {
 public:
  ConformerBlock(ParamFactory<Real> f, const EncoderConfig& config);

  Var<Real> forward(const Var<Real>& x, const SeqLayout& layout, const ForwardContext& ctx,
                    num::AttentionProbe<Real>* probe = nullptr) const;

 private:
  struct FeedForward {
    LayerNorm<Real> norm;
    Linear<Real> up;
    Linear<Real> down;
  };

  Var<Real> feed_forward(const FeedForward& ff, const Var<Real>& x, const ForwardContext& ctx) const;

  std::size_t heads_;
  Real dropout_;
  FeedForward ff1_;
  FeedForward ff2_;
  LayerNorm<Real> attn_norm_;
  Linear<Real> wq_, wk_, wv_, wo_;
  LayerNorm<Real> conv_norm_;
  Linear<Real> pointwise_in_;  // d -> 2d, followed by GLU
  Var<Real> depthwise_weight_;  // [K x d]
  Var<Real> depthwise_bias_;
  Linear<Real> pointwise_out_;
  LayerNorm<Real> out_norm_;
};

template <typename Real>
class ConformerStack {
 public:
  ConformerStack(ParamFactory<Real> f, std::size_t layers, const EncoderConfig& config);

  std::size_t depth() const { return blocks_.size(); }

  Var<Real> encode(const Var<Real>& x, const SeqLayout& layout, const ForwardContext& ctx) const;

 private:
  std::vector<ConformerBlock<Real>> blocks_;
};

}  // namespace vavl::nn

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

#include "vavl/conformer.hpp"

#include <cmath>

namespace vavl::nn {

void EncoderConfig::validate() const {
  require(d_model >= 1 && ffn_hidden >= 1 && num_heads >= 1, ErrorCode::kInvalidArgument,
          "encoder widths must be positive");
  require(d_model % num_heads == 0, ErrorCode::kInvalidArgument,
          "d_model (" + std::to_string(d_model) + ") must be divisible by num_heads (" +
              std::to_string(num_heads) + ")");
  require(conv_kernel % 2 == 1 && frontend_kernel % 2 == 1, ErrorCode::kInvalidArgument,
          "convolution kernels must be odd");
  require(dropout >= 0.0 && dropout < 1.0, ErrorCode::kInvalidArgument,
          "dropout must be in [0, 1)");
  require(layers_acoustic >= 1 && layers_visual >= 1 && layers_shared >= 1,
          ErrorCode::kInvalidArgument, "every conformer stack needs at least one layer");
}

nlohmann::json to_json(const EncoderConfig& c) {
  return {{"d_model", c.d_model},
          {"ffn_hidden", c.ffn_hidden},
          {"num_heads", c.num_heads},
          {"dropout", c.dropout},
          {"conv_kernel", c.conv_kernel},
          {"frontend_kernel", c.frontend_kernel},
          {"layers_acoustic", c.layers_acoustic},
          {"layers_visual", c.layers_visual},
          {"layers_shared", c.layers_shared}};
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.d_model = j.value("d_model", c.d_model);
  c.ffn_hidden = j.value("ffn_hidden", c.ffn_hidden);
  c.num_heads = j.value("num_heads", c.num_heads);
  c.dropout = j.value("dropout", c.dropout);
  c.conv_kernel = j.value("conv_kernel", c.conv_kernel);
  c.frontend_kernel = j.value("frontend_kernel", c.frontend_kernel);
  c.layers_acoustic = j.value("layers_acoustic", c.layers_acoustic);
  c.layers_visual = j.value("layers_visual", c.layers_visual);
  c.layers_shared = j.value("layers_shared", c.layers_shared);
  return c;
}

template <typename Real>
Var<Real> ParamFactory<Real>::uniform(const std::string& name, num::Shape shape,
                                      std::size_t fan_in) {
  Tensor<Real> init(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : init.data) v = static_cast<Real>(rng_->uniform(-bound, bound));
  return group_->add(prefix_ + name, std::move(init));
}

template <typename Real>
Var<Real> ParamFactory<Real>::constant(const std::string& name, num::Shape shape, Real value) {
  return group_->add(prefix_ + name, Tensor<Real>(std::move(shape), value));
}

template <typename Real>
Linear<Real>::Linear(ParamFactory<Real> f, std::size_t in, std::size_t out)
    : weight(f.uniform("weight", {in, out}, in)), bias(f.constant("bias", {out}, Real(0))) {}

template <typename Real>
LayerNorm<Real>::LayerNorm(ParamFactory<Real> f, std::size_t dim)
    : gamma(f.constant("gamma", {dim}, Real(1))), beta(f.constant("beta", {dim}, Real(0))) {}

template <typename Real>
Frontend<Real>::Frontend(ParamFactory<Real> f, std::size_t input_dim, const EncoderConfig& config)
    : input_dim_(input_dim),
      weight_(f.uniform("weight", {config.frontend_kernel, input_dim, config.d_model},
                        config.frontend_kernel * input_dim)),
      bias_(f.constant("bias", {config.d_model}, Real(0))) {}

template <typename Real>
Var<Real> Frontend<Real>::project(const Var<Real>& frames, const SeqLayout& layout) const {
  require(frames->value.cols() == input_dim_, ErrorCode::kShapeMismatch,
          "frontend: expected input width " + std::to_string(input_dim_) + ", got " +
              std::to_string(frames->value.cols()));
  for (std::size_t len : layout.lengths)
    require(len >= 1, ErrorCode::kInvalidArgument, "frontend: sequence with T=0");
  return num::conv1d(frames, weight_, bias_, layout);
}

template <typename Real>
ConformerBlock<Real>::ConformerBlock(ParamFactory<Real> f, const EncoderConfig& config)
    : heads_(config.num_heads), dropout_(static_cast<Real>(config.dropout)) {
  config.validate();
  const std::size_t d = config.d_model, h = config.ffn_hidden;
  ff1_ = {LayerNorm<Real>(f.scoped("ff1.norm"), d), Linear<Real>(f.scoped("ff1.up"), d, h),
          Linear<Real>(f.scoped("ff1.down"), h, d)};
  attn_norm_ = LayerNorm<Real>(f.scoped("attn.norm"), d);
  wq_ = Linear<Real>(f.scoped("attn.q"), d, d);
  wk_ = Linear<Real>(f.scoped("attn.k"), d, d);
  wv_ = Linear<Real>(f.scoped("attn.v"), d, d);
  wo_ = Linear<Real>(f.scoped("attn.out"), d, d);
  conv_norm_ = LayerNorm<Real>(f.scoped("conv.norm"), d);
  pointwise_in_ = Linear<Real>(f.scoped("conv.pointwise_in"), d, 2 * d);
  auto dw = f.scoped("conv.depthwise");
  depthwise_weight_ = dw.uniform("weight", {config.conv_kernel, d}, config.conv_kernel);
  depthwise_bias_ = dw.constant("bias", {d}, Real(0));
  pointwise_out_ = Linear<Real>(f.scoped("conv.pointwise_out"), d, d);
  ff2_ = {LayerNorm<Real>(f.scoped("ff2.norm"), d), Linear<Real>(f.scoped("ff2.up"), d, h),
          Linear<Real>(f.scoped("ff2.down"), h, d)};
  out_norm_ = LayerNorm<Real>(f.scoped("out_norm"), d);
}

template <typename Real>
Var<Real> ConformerBlock<Real>::feed_forward(const FeedForward& ff, const Var<Real>& x,
                                             const ForwardContext& ctx) const {
  Var<Real> h = num::silu(ff.up(ff.norm(x)));
  h = num::dropout(h, dropout_, ctx.dropout_rng());
  h = num::dropout(ff.down(h), dropout_, ctx.dropout_rng());
  return num::add(x, num::scale(h, Real(0.5)));
}

template <typename Real>
Var<Real> ConformerBlock<Real>::forward(const Var<Real>& x, const SeqLayout& layout,
                                        const ForwardContext& ctx,
                                        num::AttentionProbe<Real>* probe) const {
  Rng* drop = ctx.dropout_rng();
  Var<Real> y = feed_forward(ff1_, x, ctx);

  Var<Real> a = attn_norm_(y);
  a = num::masked_attention(wq_(a), wk_(a), wv_(a), layout, heads_, probe);
  y = num::add(y, num::dropout(wo_(a), dropout_, drop));

  Var<Real> c = num::glu(pointwise_in_(conv_norm_(y)));
  c = num::silu(num::depthwise_conv1d(c, depthwise_weight_, depthwise_bias_, layout));
  y = num::add(y, num::dropout(pointwise_out_(c), dropout_, drop));

  y = feed_forward(ff2_, y, ctx);
  y = num::mask_rows(out_norm_(y), layout);
  require(y->value.all_finite(), ErrorCode::kDivergence, "non-finite conformer activations");
  return y;
}

template <typename Real>
ConformerStack<Real>::ConformerStack(ParamFactory<Real> f, std::size_t layers,
                                     const EncoderConfig& config) {
  for (std::size_t i = 0; i < layers; ++i)
    blocks_.emplace_back(f.scoped("block" + std::to_string(i)), config);
}

template <typename Real>
Var<Real> ConformerStack<Real>::encode(const Var<Real>& x, const SeqLayout& layout,
                                       const ForwardContext& ctx) const {
  Var<Real> y = x;
  for (const auto& block : blocks_) y = block.forward(y, layout, ctx);
  return y;
}

template class ParamFactory<float>;
template class ParamFactory<double>;
template struct Linear<float>;
template struct Linear<double>;
template struct LayerNorm<float>;
template struct LayerNorm<double>;
template class Frontend<float>;
template class Frontend<double>;
template class ConformerBlock<float>;
template class ConformerBlock<double>;
template class ConformerStack<float>;
template class ConformerStack<double>;

}  // namespace vavl::nn

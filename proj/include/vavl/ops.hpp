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

#include <cstddef>
#include <vector>

#include "vavl/autograd.hpp"
#include "vavl/rng.hpp"

// Differentiable operations. Matrices are row-major [rows x cols]; padded
// sequence batches are flattened to [batch * max_len x channels] and carry
// a SeqLayout describing the valid prefix of each sequence.
namespace vavl::num {

struct SeqLayout {
  std::size_t batch = 0;
  std::size_t max_len = 0;
  std::vector<std::size_t> lengths;

  std::size_t rows() const { return batch * max_len; }
  bool valid(std::size_t b, std::size_t t) const { return t < lengths[b]; }
  static SeqLayout single(std::size_t length) { return SeqLayout{1, length, {length}}; }
};

template <typename Real>
Var<Real> add(const Var<Real>& a, const Var<Real>& b);

template <typename Real>
Var<Real> mul(const Var<Real>& a, const Var<Real>& b);

template <typename Real>
Var<Real> scale(const Var<Real>& a, Real factor);

// Sum of all entries, as a [1] tensor.
template <typename Real>
Var<Real> sum(const Var<Real>& a);

template <typename Real>
Var<Real> sum_squares(const Var<Real>& a);

// y = x W + b with x [N x in], W [in x out], b [out]. `bias` may be null.
template <typename Real>
Var<Real> linear(const Var<Real>& x, const Var<Real>& weight, const Var<Real>& bias);

template <typename Real>
Var<Real> relu(const Var<Real>& x);

// x * sigmoid(x)
template <typename Real>
Var<Real> silu(const Var<Real>& x);

// Splits the last dimension in halves (a, g) and returns a * sigmoid(g).
template <typename Real>
Var<Real> glu(const Var<Real>& x);

// Row-wise normalization over the last dimension with affine gamma/beta.
template <typename Real>
Var<Real> layer_norm(const Var<Real>& x, const Var<Real>& gamma, const Var<Real>& beta,
                     Real eps = Real(1e-5));

// Inverted dropout. Identity when `rng` is null or p == 0.
template <typename Real>
Var<Real> dropout(const Var<Real>& x, Real p, Rng* rng);

template <typename Real>
Var<Real> concat_cols(const Var<Real>& a, const Var<Real>& b);

// Zeroes rows outside each sequence's valid prefix.
template <typename Real>
Var<Real> mask_rows(const Var<Real>& x, const SeqLayout& layout);

// 'Same'-padded temporal convolution. Padded input rows are treated as
// zero and padded output rows are zeroed. weight is [K x in x out].
template <typename Real>
Var<Real> conv1d(const Var<Real>& x, const Var<Real>& weight, const Var<Real>& bias,
                 const SeqLayout& layout);

// Per-channel temporal convolution, masked like conv1d. weight is [K x C].
template <typename Real>
Var<Real> depthwise_conv1d(const Var<Real>& x, const Var<Real>& weight, const Var<Real>& bias,
                           const SeqLayout& layout);

// Optional sink for attention probabilities: one [max_len x max_len]
// matrix per (batch, head), zero outside the valid block.
template <typename Real>
struct AttentionProbe {
  std::vector<Tensor<Real>> weights;
};

// Scaled dot-product attention over already-projected q, k, v, split into
// `heads` slices of the channel dimension. Keys beyond a sequence's length
// receive exactly zero weight; padded query rows produce zeros.
template <typename Real>
Var<Real> masked_attention(const Var<Real>& q, const Var<Real>& k, const Var<Real>& v,
                           const SeqLayout& layout, std::size_t heads,
                           AttentionProbe<Real>* probe = nullptr);

// Mean over each sequence's valid frames: [B*T x d] -> [B x d].
template <typename Real>
Var<Real> mean_pool(const Var<Real>& x, const SeqLayout& layout);

// Sinusoidal absolute positional table [max_len x dim] tiled across the
// batch, with padded rows zero.
template <typename Real>
Tensor<Real> positional_encoding(const SeqLayout& layout, std::size_t dim);

// Plain (non-differentiable) helpers.
template <typename Real>
Tensor<Real> softmax_rows(const Tensor<Real>& logits);

template <typename Real>
Tensor<Real> mean_pool_values(const Tensor<Real>& x, const SeqLayout& layout);

}  // namespace vavl::num

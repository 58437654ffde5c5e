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

#include <cmath>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vavl/conformer.hpp"
#include "vavl/error.hpp"
#include "vavl/gradcheck.hpp"

namespace vavl::nn {
namespace {

using num::GroupId;

EncoderConfig small_config(double dropout = 0.0) {
  EncoderConfig c;
  c.d_model = 8;
  c.ffn_hidden = 16;
  c.num_heads = 2;
  c.conv_kernel = 3;
  c.dropout = dropout;
  return c;
}

template <typename Real>
struct Fixture {
  num::ParameterGroup<Real> group{GroupId::kThetaS};
  Rng rng{17};
  EncoderConfig config;
  ConformerBlock<Real> block;

  explicit Fixture(EncoderConfig c = small_config())
      : config(c), block(ParamFactory<Real>(group, "b.", rng), config) {}
};

// Copies frames of sequence `src` (length len) into batch slot `b` of a padded block.
template <typename Real>
void place(num::Tensor<Real>& dst, std::size_t b, std::size_t max_len, const num::Tensor<Real>& src,
           std::size_t len) {
  const std::size_t d = src.cols();
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t j = 0; j < d; ++j) dst.data[(b * max_len + t) * d + j] = src.at(t, j);
}

TEST(ConformerBlock, GradientCheck) {
  Fixture<double> fx;
  Rng rng(3);
  const auto layout = SeqLayout{2, 4, {4, 2}};
  auto x = num::leaf(testing::random_tensor({8, 8}, rng), "x");
  const auto w = num::constant(testing::random_tensor({8, 8}, rng));
  std::vector<Var<double>> params = fx.group.params();
  params.push_back(x);
  const auto result = num::finite_diff_check(params, [&] {
    return num::sum(num::mul(fx.block.forward(x, layout, ForwardContext::eval()), w));
  });
  EXPECT_LE(result.max_rel_error, 1e-4);
  EXPECT_GT(result.coordinates, 500u);
}

TEST(ConformerBlock, OutputShapeForShortAndLongSequences) {
  Fixture<float> fx;
  Rng rng(5);
  for (std::size_t t : {1u, 2u, 17u}) {
    const auto x = num::constant(testing::random_tensor<float>({t, 8}, rng));
    const auto y = fx.block.forward(x, SeqLayout::single(t), ForwardContext::eval());
    EXPECT_EQ(y->value.shape, (num::Shape{t, 8}));
    EXPECT_TRUE(y->value.all_finite());
  }
}

TEST(ConformerBlock, PaddingInvariance) {
  Fixture<double> fx;
  Rng rng(9);
  const auto seq = testing::random_tensor({3, 8}, rng);
  const auto alone =
      fx.block.forward(num::constant(seq), SeqLayout::single(3), ForwardContext::eval());
  for (double pad_value : {0.0, 5.0}) {
    num::Tensor<double> padded({7, 8}, pad_value);
    place(padded, 0, 7, seq, 3);
    const auto y =
        fx.block.forward(num::constant(padded), SeqLayout{1, 7, {3}}, ForwardContext::eval());
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(y->value.at(t, j), alone->value.at(t, j), 1e-6);
    for (std::size_t t = 3; t < 7; ++t)
      for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(y->value.at(t, j), 0.0);
  }
}

TEST(ConformerBlock, AttentionRowsAreDistributionsOverValidKeys) {
  Fixture<double> fx;
  Rng rng(11);
  const auto layout = SeqLayout{2, 5, {5, 3}};
  num::AttentionProbe<double> probe;
  fx.block.forward(num::constant(testing::random_tensor({10, 8}, rng)), layout,
                   ForwardContext::eval(), &probe);
  ASSERT_EQ(probe.weights.size(), 4u);  // batch x heads
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t h = 0; h < 2; ++h) {
      const auto& w = probe.weights[b * 2 + h];
      for (std::size_t q = 0; q < layout.lengths[b]; ++q) {
        double row = 0.0;
        for (std::size_t k = 0; k < 5; ++k) {
          if (k >= layout.lengths[b]) EXPECT_EQ(w.at(q, k), 0.0);
          row += w.at(q, k);
        }
        EXPECT_NEAR(row, 1.0, 1e-12);
      }
    }
}

TEST(ConformerBlock, BatchPermutationEquivariance) {
  Fixture<double> fx;
  Rng rng(13);
  const std::vector<std::size_t> lengths{4, 2, 3};
  std::vector<num::Tensor<double>> seqs;
  for (auto len : lengths) seqs.push_back(testing::random_tensor({len, 8}, rng));
  const std::vector<std::size_t> perm{2, 0, 1};

  num::Tensor<double> x({12, 8}), xp({12, 8});
  SeqLayout layout{3, 4, lengths}, layout_p{3, 4, {}};
  for (std::size_t b = 0; b < 3; ++b) {
    place(x, b, 4, seqs[b], lengths[b]);
    place(xp, b, 4, seqs[perm[b]], lengths[perm[b]]);
    layout_p.lengths.push_back(lengths[perm[b]]);
  }
  const auto y = fx.block.forward(num::constant(x), layout, ForwardContext::eval());
  const auto yp = fx.block.forward(num::constant(xp), layout_p, ForwardContext::eval());
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t j = 0; j < 8; ++j)
        EXPECT_NEAR(yp->value.at(b * 4 + t, j), y->value.at(perm[b] * 4 + t, j), 1e-12);
}

TEST(Frontend, ZeroInputGivesZeroOutput) {
  num::ParameterGroup<double> group(GroupId::kThetaA);
  Rng rng(1);
  Frontend<double> frontend(ParamFactory<double>(group, "f.", rng), 6, small_config());
  const auto y = frontend.project(num::constant(num::Tensor<double>({5, 6})), SeqLayout::single(5));
  EXPECT_EQ(y->value.shape, (num::Shape{5, 8}));
  for (double v : y->value.data) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(frontend.project(num::constant(num::Tensor<double>({5, 4})), SeqLayout::single(5)),
               Error);
}

TEST(ConformerBlock, DropoutOnlyInTraining) {
  Fixture<float> fx(small_config(0.3));
  Rng data(21);
  const auto x = num::constant(testing::random_tensor<float>({6, 8}, data));
  const auto layout = SeqLayout::single(6);
  const auto e1 = fx.block.forward(x, layout, ForwardContext::eval());
  const auto e2 = fx.block.forward(x, layout, ForwardContext::eval());
  EXPECT_EQ(e1->value, e2->value);

  Rng r1(1), r2(2), r1b(1);
  const auto t1 = fx.block.forward(x, layout, ForwardContext::train(r1));
  const auto t2 = fx.block.forward(x, layout, ForwardContext::train(r2));
  const auto t1b = fx.block.forward(x, layout, ForwardContext::train(r1b));
  EXPECT_NE(t1->value, t2->value);
  EXPECT_EQ(t1->value, t1b->value);
}

TEST(EncoderConfig, RejectsIndivisibleHeads) {
  auto c = small_config();
  c.num_heads = 3;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_THROW(Fixture<float>{c}, Error);
  c = EncoderConfig{};
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(encoder_config_from_json(to_json(small_config())).d_model, 8u);
}

TEST(ConformerStack, DepthAndParameterNames) {
  num::ParameterGroup<float> group(GroupId::kThetaS);
  Rng rng(0);
  ConformerStack<float> stack(ParamFactory<float>(group, "shared.encoder.", rng), 2, small_config());
  EXPECT_EQ(stack.depth(), 2u);
  EXPECT_NE(group.find("shared.encoder.block0.ff1.up.weight"), nullptr);
  EXPECT_NE(group.find("shared.encoder.block1.out_norm.gamma"), nullptr);
}

}  // namespace
}  // namespace vavl::nn

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

#include <cstring>
#include <set>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vavl/error.hpp"
#include "vavl/gradcheck.hpp"
#include "vavl/model.hpp"
#include "vavl/objectives.hpp"

namespace vavl::model {
namespace {

using data::Modality;
using nn::ForwardContext;

constexpr GroupId kAllGroups[] = {GroupId::kThetaA, GroupId::kThetaV, GroupId::kThetaS,
                                  GroupId::kThetaAV};

template <typename Real>
SequenceInput<Real> random_input(std::size_t dim, std::vector<std::size_t> lengths, Rng& rng) {
  const std::size_t max_len = *std::max_element(lengths.begin(), lengths.end());
  num::Tensor<Real> frames({lengths.size() * max_len, dim});
  for (std::size_t b = 0; b < lengths.size(); ++b)
    for (std::size_t t = 0; t < lengths[b]; ++t)
      for (std::size_t j = 0; j < dim; ++j)
        frames.at(b * max_len + t, j) = static_cast<Real>(rng.normal());
  return {num::constant(frames), SeqLayout{lengths.size(), max_len, lengths}};
}

data::FeatureSequence random_sequence(Modality m, std::size_t t, std::size_t dim, Rng& rng) {
  data::FeatureSequence s{m, t, dim, std::vector<float>(t * dim)};
  for (auto& v : s.values) v = static_cast<float>(rng.normal());
  return s;
}

std::vector<Var<double>> all_params(VavlModel<double>& m) {
  std::vector<Var<double>> out;
  for (auto id : kAllGroups)
    for (const auto& p : m.group(id).params()) out.push_back(p);
  return out;
}

// Weighted prediction sum plus reconstruction error; touches every output.
Var<double> probe_loss(const ForwardOutput<double>& out, const num::Tensor<double>& weights) {
  Var<double> loss = num::sum(num::mul(out.pred, num::constant(weights)));
  if (out.recon) loss = num::add(loss, loss::mse(out.recon, out.pooled_input));
  return loss;
}

TEST(Model, UnimodalGradientCheck) {
  auto cfg = testing::tiny_model();
  cfg.head_dropout = 0.0;
  VavlModel<double> m(cfg, 1);
  Rng rng(2);
  const auto weights = testing::random_tensor({2, 3}, rng);
  for (auto modality : {Modality::kAcoustic, Modality::kVisual}) {
    const auto input = random_input<double>(cfg.input_dim(modality), {3, 2}, rng);
    const auto params = all_params(m);
    const auto r = num::finite_diff_check(params, [&] {
      return probe_loss(m.forward_unimodal(modality, input, ForwardContext::eval()), weights);
    });
    EXPECT_LE(r.max_rel_error, 1e-4) << data::to_string(modality);
  }
}

TEST(Model, AudioVisualGradientCheck) {
  auto cfg = testing::tiny_model(data::Task::kRegression);
  VavlModel<double> m(cfg, 3);
  Rng rng(4);
  const auto a = random_input<double>(6, {2, 3}, rng);
  const auto v = random_input<double>(5, {4, 1}, rng);
  const auto weights = testing::random_tensor({2, 3}, rng);
  const auto params = all_params(m);
  const auto r = num::finite_diff_check(params, [&] {
    return num::sum(num::mul(m.forward_audiovisual(a, v, ForwardContext::eval()),
                             num::constant(weights)));
  });
  EXPECT_LE(r.max_rel_error, 1e-4);
}

std::set<std::string> grad_keys(const num::GradMap<float>& g) {
  std::set<std::string> keys;
  for (const auto& [k, v] : g) keys.insert(k);
  return keys;
}

bool subset(const std::set<std::string>& a, const std::set<std::string>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

TEST(Model, PathIsolation) {
  VavlModel<float> m(testing::tiny_model(), 5);
  Rng rng(6);
  const auto a = random_input<float>(6, {3}, rng);
  const auto v = random_input<float>(5, {3}, rng);
  const std::vector<int> label{1};

  auto theta = [&](GroupId id) { return m.parameter_names(id); };
  auto unite = [](std::set<std::string> x, const std::set<std::string>& y) {
    x.insert(y.begin(), y.end());
    return x;
  };

  const auto ga = num::backward(loss::cross_entropy(
      m.forward_unimodal(Modality::kAcoustic, a, ForwardContext::eval()).pred,
      std::span<const int>(label)));
  EXPECT_TRUE(subset(grad_keys(ga), unite(theta(GroupId::kThetaA), theta(GroupId::kThetaS))));
  EXPECT_TRUE(ga.count("acoustic.frontend.weight"));
  EXPECT_TRUE(ga.count("shared.encoder.block0.ff1.up.weight"));

  const auto gv = num::backward(loss::cross_entropy(
      m.forward_unimodal(Modality::kVisual, v, ForwardContext::eval()).pred,
      std::span<const int>(label)));
  EXPECT_TRUE(subset(grad_keys(gv), unite(theta(GroupId::kThetaV), theta(GroupId::kThetaS))));
  EXPECT_TRUE(gv.count("visual.head.fc1.weight"));

  num::FreezeGuard<float> freeze({&m.group(GroupId::kThetaA), &m.group(GroupId::kThetaV),
                                  &m.group(GroupId::kThetaS)});
  const auto gav = num::backward(loss::cross_entropy(
      m.forward_audiovisual(a, v, ForwardContext::eval()), std::span<const int>(label)));
  EXPECT_EQ(grad_keys(gav), theta(GroupId::kThetaAV));
}

TEST(Model, GroupsPartitionParameters) {
  VavlModel<float> m(testing::tiny_model(), 0);
  std::set<std::string> seen;
  std::size_t total = 0;
  for (auto id : kAllGroups) {
    const auto names = m.parameter_names(id);
    EXPECT_FALSE(names.empty());
    total += names.size();
    seen.insert(names.begin(), names.end());
    for (const auto& p : m.group(id).params()) EXPECT_TRUE(p->requires_grad);
  }
  EXPECT_EQ(seen.size(), total);
  for (const auto& n : m.parameter_names(GroupId::kThetaA)) EXPECT_TRUE(n.starts_with("acoustic."));
  for (const auto& n : m.parameter_names(GroupId::kThetaV)) EXPECT_TRUE(n.starts_with("visual."));
  for (const auto& n : m.parameter_names(GroupId::kThetaS)) EXPECT_TRUE(n.starts_with("shared."));
  for (const auto& n : m.parameter_names(GroupId::kThetaAV)) EXPECT_TRUE(n.starts_with("fusion."));
}

std::size_t count_prefix(const VavlModel<float>& m, GroupId id, const std::string& prefix) {
  std::size_t n = 0;
  for (const auto& p : m.group(id).params())
    if (p->name.starts_with(prefix)) n += p->value.size();
  return n;
}

TEST(Model, AblationParameterDeltas) {
  const auto base_cfg = testing::tiny_model();
  VavlModel<float> base(base_cfg, 0);

  auto cfg = base_cfg;
  cfg.use_residual = false;
  EXPECT_EQ(VavlModel<float>(cfg, 0).parameter_count(), base.parameter_count());

  cfg = base_cfg;
  cfg.use_reconstruction = false;
  VavlModel<float> no_recon(cfg, 0);
  const std::size_t recon = count_prefix(base, GroupId::kThetaA, "acoustic.recon.") +
                            count_prefix(base, GroupId::kThetaV, "visual.recon.");
  EXPECT_GT(recon, 0u);
  EXPECT_EQ(base.parameter_count() - no_recon.parameter_count(), recon);

  cfg = base_cfg;
  cfg.fusion = Fusion::kAverageUnimodal;
  VavlModel<float> avg(cfg, 0);
  EXPECT_TRUE(avg.group(GroupId::kThetaAV).empty());
  EXPECT_EQ(base.parameter_count() - avg.parameter_count(),
            base.group(GroupId::kThetaAV).num_scalars());
  Rng rng(0);
  EXPECT_THROW(avg.forward_audiovisual(random_input<float>(6, {2}, rng),
                                       random_input<float>(5, {2}, rng), ForwardContext::eval()),
               Error);
  // Fusion head input is twice the encoder width.
  EXPECT_EQ(base.group(GroupId::kThetaAV).find("fusion.fc1.weight")->value.shape,
            (num::Shape{16, 8}));
}

TEST(Model, AverageFusionExamples) {
  using T = num::Tensor<double>;
  const T same({1, 3}, {0.3, -1.0, 2.0});
  const auto fused_same = average_fusion(same, same, data::Task::kClassification);
  const auto p = num::softmax_rows(same);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(fused_same[i], p[i], 1e-7);

  const T one_hot_a({1, 3}, {100.0, 0.0, 0.0}), one_hot_v({1, 3}, {0.0, 100.0, 0.0});
  const auto half = average_fusion(one_hot_a, one_hot_v, data::Task::kClassification);
  EXPECT_NEAR(half[0], 0.5, 1e-7);
  EXPECT_NEAR(half[1], 0.5, 1e-7);
  EXPECT_NEAR(half[2], 0.0, 1e-7);

  const auto reg = average_fusion(T({1, 3}, {0.2, 0.4, 0.6}), T({1, 3}, {0.4, 0.6, 0.8}),
                                  data::Task::kRegression);
  EXPECT_NEAR(reg[0], 0.3, 1e-7);
  EXPECT_NEAR(reg[1], 0.5, 1e-7);
  EXPECT_NEAR(reg[2], 0.7, 1e-7);
  EXPECT_THROW(average_fusion(T({1, 2}), T({1, 3}), data::Task::kRegression), Error);
  EXPECT_THROW(average_fusion(T({1, 4}), T({1, 4}), data::Task::kRegression), Error);
}

TEST(Model, PredictRouting) {
  VavlModel<float> m(testing::tiny_model(), 7);
  Rng rng(8);
  data::Sample s;
  s.id = "p";
  s.audio = random_sequence(Modality::kAcoustic, 4, 6, rng);
  s.video = random_sequence(Modality::kVisual, 3, 5, rng);
  s.target = data::Categorical{0, 3};

  const auto paired = predict(s, m);
  EXPECT_EQ(paired.condition, Condition::kAudioVisual);
  EXPECT_EQ(paired.output.size(), 3u);
  EXPECT_EQ(predict(s, m).output, paired.output);

  auto audio_only = s;
  audio_only.video.reset();
  const auto pa = predict(audio_only, m);
  EXPECT_EQ(pa.condition, Condition::kAcoustic);
  const auto direct = m.forward_unimodal(Modality::kAcoustic,
                                         SequenceInput<float>::from_sequence(*s.audio),
                                         ForwardContext::eval())
                          .pred->value;
  EXPECT_EQ(pa.output, std::vector<double>(direct.data.begin(), direct.data.end()));

  auto video_only = s;
  video_only.audio.reset();
  EXPECT_EQ(predict(video_only, m).condition, Condition::kVisual);

  auto cfg = testing::tiny_model();
  cfg.fusion = Fusion::kAverageUnimodal;
  VavlModel<float> avg(cfg, 7);
  const auto pavg = predict(s, avg);
  EXPECT_TRUE(pavg.probabilities);
  double total = 0;
  for (double v : pavg.output) total += v;
  EXPECT_NEAR(total, 1.0, 1e-6);
}

TEST(Model, ZeroFusionHeadGivesZeroOutput) {
  VavlModel<float> m(testing::tiny_model(), 9);
  for (const auto& p : m.group(GroupId::kThetaAV).params())
    std::fill(p->value.data.begin(), p->value.data.end(), 0.0f);
  Rng rng(1);
  const auto out = m.forward_audiovisual(random_input<float>(6, {3, 2}, rng),
                                         random_input<float>(5, {1, 4}, rng), ForwardContext::eval());
  EXPECT_EQ(out->value.shape, (num::Shape{2, 3}));
  for (float v : out->value.data) EXPECT_EQ(v, 0.0f);
}

TEST(Model, FusionProbeSeesConcatenatedEmbeddings) {
  VavlModel<float> m(testing::tiny_model(), 10);
  Rng rng(2);
  const auto a = random_input<float>(6, {3, 5}, rng);
  const auto v = random_input<float>(5, {2, 2}, rng);
  FusionProbe<float> probe;
  m.forward_audiovisual(a, v, ForwardContext::eval(), &probe);
  const auto pa = m.forward_unimodal(Modality::kAcoustic, a, ForwardContext::eval()).pooled_shared;
  const auto pv = m.forward_unimodal(Modality::kVisual, v, ForwardContext::eval()).pooled_shared;
  ASSERT_EQ(probe.fusion_input.shape, (num::Shape{2, 16}));
  for (std::size_t b = 0; b < 2; ++b) {
    EXPECT_EQ(0, std::memcmp(&probe.fusion_input.data[b * 16], &pa->value.data[b * 8], 8 * 4));
    EXPECT_EQ(0, std::memcmp(&probe.fusion_input.data[b * 16 + 8], &pv->value.data[b * 8], 8 * 4));
  }
}

TEST(Model, CheckpointRoundTrip) {
  VavlModel<float> m(testing::tiny_model(data::Task::kRegression), 11);
  m.set_fusion_updates(4);
  const auto dir = testing::scratch_dir("model_ckpt");
  num::save_checkpoint(dir / "m.vavc", m.to_checkpoint());
  const auto back = VavlModel<float>::from_checkpoint(num::load_checkpoint(dir / "m.vavc"));
  EXPECT_EQ(back.fusion_updates(), 4u);
  EXPECT_EQ(back.config().task, data::Task::kRegression);
  EXPECT_EQ(back.snapshot(), m.snapshot());

  auto ckpt = m.to_checkpoint();
  ckpt.entries.pop_back();
  EXPECT_THROW(VavlModel<float>::from_checkpoint(ckpt), Error);

  auto cfg = testing::tiny_model(data::Task::kRegression);
  cfg.fusion = Fusion::kAverageUnimodal;
  const auto avg_ckpt = VavlModel<float>(cfg, 0).to_checkpoint();
  for (const auto& e : avg_ckpt.entries) EXPECT_FALSE(e.key.starts_with("theta_av/"));
}

// Copies values of same-named parameters from the model into `group`.
void copy_from(const VavlModel<double>& m, GroupId id, num::ParameterGroup<double>& group) {
  for (const auto& p : group.params()) {
    const auto src = m.group(id).find(p->name);
    ASSERT_NE(src, nullptr) << p->name;
    p->value = src->value;
  }
}

TEST(Model, ResidualAblationPoolsSharedOutputOnly) {
  auto cfg = testing::tiny_model();
  cfg.use_residual = false;
  VavlModel<double> m(cfg, 12);
  VavlModel<double> with_residual(testing::tiny_model(), 12);
  Rng rng(3);
  const auto a = random_input<double>(6, {4, 2}, rng);
  const auto ctx = ForwardContext::eval();
  const auto out = m.forward_unimodal(Modality::kAcoustic, a, ctx);
  const auto out_r = with_residual.forward_unimodal(Modality::kAcoustic, a, ctx);
  EXPECT_NE(out.pooled_shared->value, out_r.pooled_shared->value);

  // Rebuild the pipeline from standalone modules carrying the model's weights.
  Rng scratch(0);
  num::ParameterGroup<double> ga(GroupId::kThetaA), gs(GroupId::kThetaS);
  nn::ParamFactory<double> fa(ga, "acoustic.", scratch);
  nn::Frontend<double> frontend(fa.scoped("frontend"), 6, cfg.encoder);
  nn::ConformerStack<double> unimodal(fa.scoped("encoder"), 1, cfg.encoder);
  nn::ConformerStack<double> shared(nn::ParamFactory<double>(gs, "shared.encoder.", scratch), 1,
                                    cfg.encoder);
  copy_from(m, GroupId::kThetaA, ga);
  copy_from(m, GroupId::kThetaS, gs);
  auto x = frontend.project(a.frames, a.layout);
  x = num::add(x, num::constant(num::positional_encoding<double>(a.layout, 8)));
  const auto s = shared.encode(unimodal.encode(x, a.layout, ctx), a.layout, ctx);
  EXPECT_EQ(num::mean_pool(s, a.layout)->value, out.pooled_shared->value);

  EXPECT_EQ(out.pooled_input, num::mean_pool_values(a.frames->value, a.layout));
  EXPECT_EQ(out.recon->value.shape, (num::Shape{2, 6}));
}

TEST(Model, ConfigValidationAndPresets) {
  auto cfg = testing::tiny_model();
  cfg.num_classes = 1;
  EXPECT_THROW(VavlModel<float>(cfg, 0), Error);
  EXPECT_EQ(ModelConfig::preset("base-50d").encoder.d_model, 50u);
  EXPECT_EQ(ModelConfig::preset("wide-512d").encoder.d_model, 512u);
  EXPECT_THROW(ModelConfig::preset("nope"), Error);
  const auto round = model_config_from_json(to_json(testing::tiny_model(data::Task::kRegression)));
  EXPECT_EQ(round.task, data::Task::kRegression);
  EXPECT_EQ(round.encoder.d_model, 8u);
  EXPECT_EQ(round.visual_dim, 5u);

  VavlModel<float> m(testing::tiny_model(), 0);
  Rng rng(0);
  EXPECT_THROW(m.forward_unimodal(Modality::kAcoustic, random_input<float>(5, {2}, rng),
                                  ForwardContext::eval()),
               Error);
}

TEST(Model, InitIsDeterministicPerSeed) {
  VavlModel<float> a(testing::tiny_model(), 3), b(testing::tiny_model(), 3), c(testing::tiny_model(), 4);
  EXPECT_EQ(a.snapshot(), b.snapshot());
  EXPECT_NE(a.snapshot(), c.snapshot());
}

}  // namespace
}  // namespace vavl::model

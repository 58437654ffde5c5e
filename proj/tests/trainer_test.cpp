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

#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vavl/error.hpp"
#include "vavl/evalkit.hpp"
#include "vavl/trainer.hpp"

namespace vavl::train {
namespace {

using data::Presence;

constexpr GroupId kGroups[] = {GroupId::kThetaA, GroupId::kThetaV, GroupId::kThetaS,
                               GroupId::kThetaAV};

data::SynthSpec mix_spec(double paired, double audio_only, double video_only,
                         data::Task task = data::Task::kClassification) {
  auto s = testing::tiny_spec(task);
  s.num_samples = 60;
  s.frac_paired = paired;
  s.frac_audio_only = audio_only;
  s.frac_video_only = video_only;
  return s;
}

TrainConfig fast_config(std::uint64_t seed = 0) {
  TrainConfig c;
  c.epochs = 3;
  c.lr = 1e-3;
  c.batch_size = 8;
  c.seed = seed;
  return c;
}

std::vector<std::size_t> with_presence(const data::Dataset& ds, Presence p, std::size_t n) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ds.size() && out.size() < n; ++i)
    if (ds.samples[i].presence() == p) out.push_back(i);
  return out;
}

std::array<std::uint64_t, 4> sums(const VavlModel<float>& m) {
  std::array<std::uint64_t, 4> out{};
  for (auto id : kGroups) out[static_cast<int>(id)] = num::checksum(m.group(id));
  return out;
}

TEST(TrainStep, AudioOnlyBatchTouchesOnlyAcousticAndShared) {
  const auto ds = data::generate_synthetic(mix_spec(0.5, 0.3, 0.2), 1);
  VavlModel<float> m(testing::tiny_model(), 0);
  Trainer trainer(m, fast_config());
  const auto before = sums(m);
  const auto r = trainer.step(data::make_batch(ds, with_presence(ds, Presence::kAudioOnly, 4)));
  const auto after = sums(m);
  EXPECT_TRUE(r.acoustic.has_value());
  EXPECT_FALSE(r.visual.has_value());
  EXPECT_FALSE(r.av.has_value());
  EXPECT_NE(before[0], after[0]);
  EXPECT_EQ(before[1], after[1]);
  EXPECT_NE(before[2], after[2]);
  EXPECT_EQ(before[3], after[3]);
}

TEST(TrainStep, FusionStepLeavesFrozenGroupsBitUnchanged) {
  const auto ds = data::generate_synthetic(mix_spec(1.0, 0.0, 0.0), 2);
  VavlModel<float> m(testing::tiny_model(), 0);
  auto cfg = fast_config();
  cfg.audit = true;
  Trainer trainer(m, cfg);
  const auto r = trainer.step(data::make_batch(ds, with_presence(ds, Presence::kPaired, 5)));
  ASSERT_EQ(r.audits.size(), 3u);
  EXPECT_EQ(r.audits[0].substep, "acoustic");
  EXPECT_EQ(r.audits[1].substep, "visual");
  EXPECT_EQ(r.audits[2].substep, "av");
  const auto& av = r.audits[2];
  EXPECT_FALSE(av.changed(GroupId::kThetaA));
  EXPECT_FALSE(av.changed(GroupId::kThetaV));
  EXPECT_FALSE(av.changed(GroupId::kThetaS));
  EXPECT_TRUE(av.changed(GroupId::kThetaAV));
  EXPECT_FALSE(r.audits[0].changed(GroupId::kThetaAV));
  EXPECT_FALSE(r.audits[1].changed(GroupId::kThetaA));
  // Groups are trainable again after the fusion step.
  for (auto id : kGroups) EXPECT_TRUE(m.group(id).trainable());
  EXPECT_EQ(m.fusion_updates(), 1u);
}

TEST(TrainStep, OptimizerCountersFollowUpdateSequence) {
  const auto ds = data::generate_synthetic(mix_spec(0.5, 0.3, 0.2), 3);
  VavlModel<float> m(testing::tiny_model(), 0);
  Trainer trainer(m, fast_config());
  trainer.step(data::make_batch(ds, with_presence(ds, Presence::kAudioOnly, 3)));
  trainer.step(data::make_batch(ds, with_presence(ds, Presence::kVideoOnly, 3)));
  trainer.step(data::make_batch(ds, with_presence(ds, Presence::kPaired, 3)));
  EXPECT_EQ(trainer.optimizer_steps(GroupId::kThetaA), 2u);
  EXPECT_EQ(trainer.optimizer_steps(GroupId::kThetaV), 2u);
  EXPECT_EQ(trainer.optimizer_steps(GroupId::kThetaS), 4u);
  EXPECT_EQ(trainer.optimizer_steps(GroupId::kThetaAV), 1u);
}

TEST(TrainStep, AverageFusionSkipsFusionStep) {
  const auto ds = data::generate_synthetic(mix_spec(1.0, 0.0, 0.0), 4);
  auto mc = testing::tiny_model();
  mc.fusion = model::Fusion::kAverageUnimodal;
  VavlModel<float> m(mc, 0);
  auto cfg = fast_config();
  cfg.audit = true;
  Trainer trainer(m, cfg);
  const auto r = trainer.step(data::make_batch(ds, with_presence(ds, Presence::kPaired, 4)));
  EXPECT_EQ(r.audits.size(), 2u);
  EXPECT_FALSE(r.av.has_value());
  EXPECT_TRUE(m.group(GroupId::kThetaAV).empty());
  EXPECT_EQ(trainer.optimizer_steps(GroupId::kThetaAV), 0u);
}

TEST(TrainStep, SizeOneRegressionBatchIsDropped) {
  const auto ds = data::generate_synthetic(mix_spec(1.0, 0.0, 0.0, data::Task::kRegression), 5);
  VavlModel<float> m(testing::tiny_model(data::Task::kRegression), 0);
  Trainer trainer(m, fast_config());
  const auto before = sums(m);
  const std::vector<std::size_t> one{0};
  const auto r = trainer.step(data::make_batch(ds, one));
  EXPECT_TRUE(r.skipped);
  EXPECT_EQ(sums(m), before);
  ASSERT_EQ(trainer.warnings().size(), 1u);
  EXPECT_NE(trainer.warnings()[0].find("size-1"), std::string::npos);
}

TEST(TrainStep, LossComposition) {
  const auto ds = data::generate_synthetic(mix_spec(1.0, 0.0, 0.0), 6);
  VavlModel<float> m(testing::tiny_model(), 0);
  auto cfg = fast_config();
  cfg.alpha = 0.5;
  Trainer trainer(m, cfg);
  const auto r = trainer.step(data::make_batch(ds, with_presence(ds, Presence::kPaired, 4)));
  ASSERT_TRUE(r.acoustic && r.visual && r.av);
  EXPECT_EQ(r.acoustic->alpha, 0.5);
  EXPECT_NEAR(r.acoustic->total, r.acoustic->pred_term + 0.5 * r.acoustic->recon_term, 1e-6);
  EXPECT_GT(r.acoustic->recon_term, 0.0);
}

TEST(Train, FreezeSoundnessOverFullRun) {
  const auto ds = data::generate_synthetic(mix_spec(0.5, 0.3, 0.2), 7);
  const auto splits = data::make_splits(ds, {}, 7);
  VavlModel<float> m(testing::tiny_model(), 0);
  auto cfg = fast_config();
  cfg.audit = true;
  Trainer trainer(m, cfg);
  for (std::uint64_t epoch = 1; epoch <= 2; ++epoch)
    for (const auto& b : data::batch_epoch(ds, splits.indices(ds, data::Split::kTrain), 6, 1, epoch))
      for (const auto& a : trainer.step(b).audits) {
        const bool fusion = a.substep == "av";
        EXPECT_EQ(a.changed(GroupId::kThetaAV), fusion);
        if (fusion) {
          EXPECT_FALSE(a.changed(GroupId::kThetaA));
          EXPECT_FALSE(a.changed(GroupId::kThetaV));
          EXPECT_FALSE(a.changed(GroupId::kThetaS));
        }
      }
}

TEST(Train, ZeroLearningRateKeepsEpochZeroMetrics) {
  const auto ds = data::generate_synthetic(mix_spec(1.0, 0.0, 0.0), 8);
  const auto splits = data::make_splits(ds, {}, 8);
  auto cfg = fast_config();
  cfg.lr = 0.0;
  const auto result = train(ds, splits, testing::tiny_model(), cfg);
  ASSERT_EQ(result.history.epochs.size(), 4u);
  for (const auto& e : result.history.epochs) {
    EXPECT_EQ(e.dev_metrics, result.history.epochs[0].dev_metrics);
    EXPECT_EQ(e.selection_value, result.history.epochs[0].selection_value);
  }
  EXPECT_EQ(result.history.selected_epoch, 1u);
}

TEST(Train, DeterministicGivenSeed) {
  const auto ds = data::generate_synthetic(mix_spec(0.5, 0.3, 0.2), 9);
  const auto splits = data::make_splits(ds, {}, 9);
  auto mc = testing::tiny_model();
  mc.encoder.dropout = 0.2;
  const auto a = train(ds, splits, mc, fast_config(4));
  const auto b = train(ds, splits, mc, fast_config(4));
  EXPECT_EQ(a.model.snapshot(), b.model.snapshot());
  EXPECT_EQ(a.history.to_jsonl(), b.history.to_jsonl());
  const auto c = train(ds, splits, mc, fast_config(5));
  EXPECT_NE(a.model.snapshot(), c.model.snapshot());
}

TEST(Train, SelectedEpochMaximizesDevMetric) {
  const auto ds = data::generate_synthetic(mix_spec(1.0, 0.0, 0.0), 10);
  const auto splits = data::make_splits(ds, {}, 10);
  auto cfg = fast_config();
  cfg.epochs = 4;
  const auto r = train(ds, splits, testing::tiny_model(), cfg);
  double best = -1e300;
  for (std::size_t e = 1; e < r.history.epochs.size(); ++e)
    best = std::max(best, r.history.epochs[e].selection_value);
  const auto& selected = r.history.epochs[r.history.selected_epoch];
  EXPECT_TRUE(selected.selected);
  EXPECT_EQ(selected.selection_value, best);
  EXPECT_EQ(r.history.selection_condition, Condition::kAudioVisual);

  // Per-epoch log: one parseable JSON object per line.
  std::istringstream lines(r.history.to_jsonl());
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("losses") && j.contains("dev_metrics") && j.contains("selected"));
    ++n;
  }
  EXPECT_EQ(n, 5u);
}

TEST(Train, UnpairedDataLeavesFusionHeadUntrained) {
  const auto ds = data::generate_synthetic(mix_spec(0.0, 0.5, 0.5), 11);
  const auto splits = data::make_splits(ds, {}, 11);
  const auto r = train(ds, splits, testing::tiny_model(), fast_config());
  EXPECT_EQ(r.model.fusion_updates(), 0u);
  EXPECT_EQ(r.history.optimizer_steps[static_cast<int>(GroupId::kThetaAV)], 0u);
  EXPECT_NE(r.history.selection_condition, Condition::kAudioVisual);

  const auto paired_ds = data::generate_synthetic(mix_spec(1.0, 0.0, 0.0), 12);
  const auto idx = testing::iota_indices(paired_ds.size());
  const Condition av[] = {Condition::kAudioVisual};
  const auto reports = eval::evaluate(r.model, paired_ds, idx, av);
  ASSERT_EQ(reports.size(), 1u);
  ASSERT_EQ(reports[0].warnings.size(), 1u);
  EXPECT_NE(reports[0].warnings[0].find("untrained fusion head"), std::string::npos);
}

TEST(Train, Preconditions) {
  const auto ds = data::generate_synthetic(mix_spec(1.0, 0.0, 0.0), 13);
  const auto splits = data::make_splits(ds, {}, 13);
  auto mc = testing::tiny_model(data::Task::kRegression);
  EXPECT_THROW(train(ds, splits, mc, fast_config()), Error);
  auto cfg = fast_config();
  cfg.epochs = 0;
  EXPECT_THROW(train(ds, splits, testing::tiny_model(), cfg), Error);
  data::SplitAssignment all_train;
  for (const auto& s : ds.samples) all_train.by_id[s.id] = data::Split::kTrain;
  EXPECT_THROW(train(ds, all_train, testing::tiny_model(), fast_config()), Error);
}

TEST(Infer, ForcedConditionsStripModalities) {
  const auto ds = data::generate_synthetic(mix_spec(0.5, 0.3, 0.2), 14);
  VavlModel<float> m(testing::tiny_model(), 3);
  const auto paired = with_presence(ds, Presence::kPaired, 1);
  const auto forced_a = infer(ds, paired, m, Condition::kAcoustic);
  auto stripped = ds.samples[paired[0]];
  stripped.video.reset();
  EXPECT_EQ(forced_a[0].output, model::predict(stripped, m).output);
  EXPECT_EQ(forced_a[0].condition, Condition::kAcoustic);

  const auto forced_v = infer(ds, paired, m, Condition::kVisual);
  stripped = ds.samples[paired[0]];
  stripped.audio.reset();
  EXPECT_EQ(forced_v[0].output, model::predict(stripped, m).output);

  const auto audio_only = with_presence(ds, Presence::kAudioOnly, 1);
  EXPECT_THROW(infer(ds, audio_only, m, Condition::kAudioVisual), Error);
  EXPECT_THROW(infer(ds, audio_only, m, Condition::kVisual), Error);

  // Mixed availability without forcing: each sample routed on its own.
  std::vector<std::size_t> mixed{paired[0], audio_only[0],
                                 with_presence(ds, Presence::kVideoOnly, 1)[0]};
  const auto routed = infer(ds, mixed, m);
  EXPECT_EQ(routed[0].condition, Condition::kAudioVisual);
  EXPECT_EQ(routed[1].condition, Condition::kAcoustic);
  EXPECT_EQ(routed[2].condition, Condition::kVisual);
}

TEST(TrainConfig, JsonRoundTrip) {
  auto c = fast_config(42);
  c.selection_metric = SelectionMetric::kMeanCcc;
  c.selection_condition = SelectionCondition::kBestAvailable;
  const auto back = train_config_from_json(to_json(c));
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(back.lr, c.lr);
  EXPECT_EQ(back.selection_metric, SelectionMetric::kMeanCcc);
  EXPECT_EQ(back.selection_condition, SelectionCondition::kBestAvailable);
  EXPECT_EQ(TrainConfig{}.metric_for(data::Task::kRegression), SelectionMetric::kMeanCcc);
}

double spearman(const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size(); ++i) r[order[i]] = double(i);
    return r;
  };
  std::vector<double> x(y.size());
  std::iota(x.begin(), x.end(), 0.0);
  const auto rx = ranks(x), ry = ranks(y);
  const double n = double(y.size()), mean = (n - 1) / 2;
  double cov = 0, vx = 0, vy = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    cov += (rx[i] - mean) * (ry[i] - mean);
    vx += (rx[i] - mean) * (rx[i] - mean);
    vy += (ry[i] - mean) * (ry[i] - mean);
  }
  return cov / std::sqrt(vx * vy);
}

class LossTrend : public ::testing::TestWithParam<std::array<double, 3>> {};

TEST_P(LossTrend, TrainingLossDecreasesAcrossEpochs) {
  const auto [paired, audio_only, video_only] = GetParam();
  auto spec = mix_spec(paired, audio_only, video_only);
  spec.num_samples = 80;
  const auto ds = data::generate_synthetic(spec, 15);
  const auto splits = data::make_splits(ds, {}, 15);
  auto cfg = fast_config(15);
  cfg.epochs = 8;
  const auto r = train(ds, splits, testing::tiny_model(), cfg);
  std::vector<double> losses;
  for (std::size_t e = 1; e < r.history.epochs.size(); ++e) {
    const auto& rec = r.history.epochs[e];
    double total = 0;
    int parts = 0;
    for (const auto& l : {rec.loss_a, rec.loss_v})
      if (l) total += *l, ++parts;
    ASSERT_GT(parts, 0);
    losses.push_back(total / parts);
  }
  EXPECT_LT(spearman(losses), 0.0);
}

INSTANTIATE_TEST_SUITE_P(Mixes, LossTrend,
                         ::testing::Values(std::array<double, 3>{1.0, 0.0, 0.0},
                                           std::array<double, 3>{0.0, 0.5, 0.5},
                                           std::array<double, 3>{0.5, 0.3, 0.2}));

}  // namespace
}  // namespace vavl::train

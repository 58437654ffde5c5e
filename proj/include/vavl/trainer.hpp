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
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vavl/datastore.hpp"
#include "vavl/model.hpp"
#include "vavl/objectives.hpp"
#include "vavl/optim.hpp"

namespace vavl::train {

using model::Condition;
using model::VavlModel;
using num::GroupId;

enum class SelectionMetric { kMacroF1, kMeanCcc };
enum class SelectionCondition { kAudioVisual, kBestAvailable };

struct TrainConfig {
  std::size_t epochs = 20;
  double lr = 5e-5;
  std::size_t batch_size = 32;
  double alpha = 1.0;
  std::uint64_t seed = 0;
  // Unset: macro-F1 for classification, mean CCC for regression.
  std::optional<SelectionMetric> selection_metric;
  // kAudioVisual falls back to the best unimodal condition when the dev
  // split has no paired samples.
  SelectionCondition selection_condition = SelectionCondition::kAudioVisual;
  // Record group checksums around every sub-step.
  bool audit = false;

  void validate() const;
  SelectionMetric metric_for(data::Task task) const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Group checksums before and after one sub-step of a batch.
struct SubstepAudit {
  std::string substep;  // "acoustic", "visual" or "av"
  std::array<std::uint64_t, 4> before{};
  std::array<std::uint64_t, 4> after{};

  bool changed(GroupId id) const {
    return before[static_cast<int>(id)] != after[static_cast<int>(id)];
  }
};

struct StepReport {
  data::Presence presence = data::Presence::kPaired;
  std::size_t batch_size = 0;
  bool skipped = false;  // size-1 regression batch
  std::optional<loss::LossValue> acoustic;
  std::optional<loss::LossValue> visual;
  std::optional<double> av;  // prediction loss of the fusion step
  std::vector<SubstepAudit> audits;
};

// Owns one ADAM optimizer per parameter group and applies the
// modality-conditional update sequence to a model it does not own.
class Trainer {
 public:
  Trainer(VavlModel<float>& model, const TrainConfig& config);

  // Presence-homogeneous batch:
  //   audio present -> acoustic pass, update theta_a and theta_s;
  //   video present -> visual pass, update theta_v and theta_s;
  //   both present with a fusion head -> freeze theta_a, theta_v, theta_s,
  //   fresh audio-visual forward, prediction loss only, update theta_av.
  StepReport step(const data::Batch& batch);

  std::uint64_t optimizer_steps(GroupId id) const { return optimizers_[static_cast<int>(id)].steps(); }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  loss::LossValue unimodal_pass(data::Modality modality, const data::Batch& batch);
  double audiovisual_pass(const data::Batch& batch);
  std::array<std::uint64_t, 4> checksums() const;

  VavlModel<float>* model_;
  TrainConfig config_;
  std::vector<num::Adam<float>> optimizers_;  // indexed by GroupId
  Rng dropout_rng_;
  std::vector<std::string> warnings_;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 0 = before training
  std::optional<double> loss_a;
  std::optional<double> loss_v;
  std::optional<double> loss_av;
  nlohmann::json dev_metrics = nlohmann::json::object();
  double selection_value = 0.0;
  bool selected = false;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t selected_epoch = 0;
  Condition selection_condition = Condition::kAudioVisual;
  std::array<std::uint64_t, 4> optimizer_steps{};
  std::vector<std::string> warnings;

  // One JSON object per line: {epoch, losses{a,v,av}, dev_metrics, selected}.
  std::string to_jsonl() const;
};

struct TrainResult {
  VavlModel<float> model;  // parameters of the selected epoch
  TrainHistory history;
};

// Runs config.epochs epochs over the train split, evaluates dev after each
// one and keeps the best epoch (first maximum). Deterministic in seed.
TrainResult train(const data::Dataset& dataset, const data::SplitAssignment& splits,
                  const model::ModelConfig& model_config, const TrainConfig& config);

// Per-sample routing; a forced condition strips the other modality.
// Forcing a condition the sample cannot satisfy is an error.
std::vector<model::Prediction> infer(const data::Dataset& dataset,
                                     std::span<const std::size_t> indices,
                                     const VavlModel<float>& model,
                                     std::optional<Condition> forced = std::nullopt);

// True when `sample` has every modality `condition` needs.
bool supports(const data::Sample& sample, Condition condition);

}  // namespace vavl::train

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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vavl/datastore.hpp"
#include "vavl/evalkit.hpp"
#include "vavl/model.hpp"
#include "vavl/trainer.hpp"

namespace vavl::cli {

enum class Ablation { kNone, kNoResidual, kNoReconstruction, kAverageFusion };

std::string to_string(Ablation a);
Ablation ablation_from_string(const std::string& s);  // none|no-residual|no-recon|avg-fusion

model::ModelConfig apply_ablation(model::ModelConfig config, Ablation ablation);

// Exactly one of `manifest` and `synth` is set.
struct DatasetSource {
  std::optional<std::filesystem::path> manifest;
  std::optional<data::SynthSpec> synth;
  std::uint64_t synth_seed = 0;
};

struct ExperimentConfig {
  DatasetSource dataset;
  model::ModelConfig model;
  train::TrainConfig train;
  data::SplitRatios splits;
  int trials = 5;
  Ablation ablation = Ablation::kNone;
  std::filesystem::path out;
  bool embedding_analysis = true;

  void validate() const;
};

// Relative manifest paths resolve against `base_dir`. The "model" object
// may name a "preset" and override individual fields.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j,
                                             const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const ExperimentConfig& c);

data::Dataset load_source(const DatasetSource& source);

struct TrialOutcome {
  int trial = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
};

struct ExperimentSummary {
  std::vector<TrialOutcome> trials;
  std::vector<eval::MetricsReport> reports;
  eval::AggregateTable table;
};

// For trial t with seed s = train.seed + t: speaker-independent re-split,
// train, evaluate every feasible condition on test. Writes
//   <out>/config.json, <out>/run_log.jsonl, <out>/aggregate.{csv,txt},
//   <out>/trial_<t>/{checkpoint.vavc, report.json, train_log.jsonl}.
// A failing trial is recorded in the run log; the remaining trials run.
ExperimentSummary run_experiment(const ExperimentConfig& config);

// Per-trial metric reports found under an experiment directory.
std::vector<eval::MetricsReport> load_reports(const std::filesystem::path& dir);

struct ComparisonRow {
  model::Condition condition = model::Condition::kAudioVisual;
  double mean_a = 0.0;
  double mean_b = 0.0;
  eval::TTestResult test;
  bool significant = false;  // p < 0.05
};

std::vector<ComparisonRow> compare(const std::filesystem::path& dir_a,
                                   const std::filesystem::path& dir_b, const std::string& metric);
nlohmann::json to_json(const std::vector<ComparisonRow>& rows, const std::string& metric);

}  // namespace vavl::cli

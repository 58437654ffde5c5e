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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vavl/datastore.hpp"
#include "vavl/model.hpp"

namespace vavl::eval {

using model::Condition;

struct F1Scores {
  double macro = 0.0;
  double micro = 0.0;
};

// Macro averages over the classes that occur in `labels`; micro is the
// global-count F1, which equals accuracy for single-label data.
F1Scores f1_scores(std::span<const int> preds, std::span<const int> labels, int num_classes);

// Split-level CCC per attribute (arousal, valence, dominance).
std::array<double, 3> ccc_eval(std::span<const std::array<double, 3>> preds,
                               std::span<const std::array<double, 3>> targets);

struct TTestResult {
  double p_value = 1.0;
  double t = 0.0;
  double df = 0.0;
  bool degenerate = false;  // both samples constant
};

// Two-tailed Welch t-test. Symmetric in its arguments.
TTestResult t_test(std::span<const double> a, std::span<const double> b);

// 1 - cos(a, v). Throws on a zero-norm input.
double cosine_distance(std::span<const double> a, std::span<const double> v);

struct EmbeddingReport {
  double mean_distance = 0.0;
  std::vector<std::string> ids;
  std::vector<double> distances;
  std::size_t skipped_zero_norm = 0;

  nlohmann::json to_json() const;
};

// Cosine distance between the pooled shared embeddings of the acoustic-only
// and visual-only passes, per paired sample.
EmbeddingReport embedding_analysis(const model::VavlModel<float>& model,
                                   const data::Dataset& dataset,
                                   std::span<const std::size_t> indices);

struct MetricsReport {
  Condition condition = Condition::kAudioVisual;
  data::Task task = data::Task::kClassification;
  std::size_t num_samples = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  std::optional<F1Scores> f1;
  std::optional<std::array<double, 3>> ccc;
  std::vector<std::string> warnings;

  // f1_macro, f1_micro or ccc_aro, ccc_val, ccc_dom, ccc_mean.
  std::map<std::string, double> metrics() const;
  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
};

// Samples among `indices` able to serve `condition`.
std::vector<std::size_t> compatible(const data::Dataset& dataset,
                                    std::span<const std::size_t> indices, Condition condition);

// Conditions with at least one compatible sample, in AV, A, V order.
std::vector<Condition> feasible_conditions(const data::Dataset& dataset,
                                           std::span<const std::size_t> indices);

// Metrics over the compatible samples under each forced condition. A
// condition without compatible samples is an error ("condition unavailable").
std::vector<MetricsReport> evaluate(const model::VavlModel<float>& model,
                                    const data::Dataset& dataset,
                                    std::span<const std::size_t> indices,
                                    std::span<const Condition> conditions, int trial = 0,
                                    std::uint64_t seed = 0);

// Mean of every metric over trials, one column per condition.
struct AggregateTable {
  std::vector<Condition> conditions;
  std::vector<std::string> metrics;
  std::map<std::pair<std::string, Condition>, double> mean;
  std::map<std::pair<std::string, Condition>, std::size_t> count;

  std::string to_csv() const;
  std::string to_text() const;
};

AggregateTable aggregate(std::span<const MetricsReport> reports);

}  // namespace vavl::eval

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

#include "vavl/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "vavl/objectives.hpp"
#include "vavl/trainer.hpp"

namespace vavl::eval {
using nlohmann::json;

namespace {

constexpr std::array<const char*, 3> kAttributeNames = {"ccc_aro", "ccc_val", "ccc_dom"};

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
}

double sample_variance(std::span<const double> x, double mean) {
  double acc = 0;
  for (double v : x) acc += (v - mean) * (v - mean);
  return acc / double(x.size() - 1);
}

}  // namespace

F1Scores f1_scores(std::span<const int> preds, std::span<const int> labels, int num_classes) {
  require(preds.size() == labels.size(), ErrorCode::kShapeMismatch,
          "f1_scores: preds and labels differ in length");
  require(!labels.empty(), ErrorCode::kInvalidArgument, "f1_scores: needs at least one sample");
  require(num_classes >= 1, ErrorCode::kInvalidArgument, "f1_scores: num_classes must be >= 1");
  const auto m = static_cast<std::size_t>(num_classes);
  std::vector<std::size_t> tp(m), fp(m), fn(m), support(m);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(preds[i] >= 0 && preds[i] < num_classes && labels[i] >= 0 && labels[i] < num_classes,
            ErrorCode::kInvalidArgument, "f1_scores: invalid class index");
    const auto p = static_cast<std::size_t>(preds[i]), y = static_cast<std::size_t>(labels[i]);
    ++support[y];
    if (p == y) {
      ++tp[y];
    } else {
      ++fp[p];
      ++fn[y];
    }
  }
  F1Scores out;
  std::size_t present = 0, tp_all = 0, fp_all = 0, fn_all = 0;
  for (std::size_t c = 0; c < m; ++c) {
    tp_all += tp[c], fp_all += fp[c], fn_all += fn[c];
    if (support[c] == 0) continue;
    ++present;
    const double denom = double(2 * tp[c] + fp[c] + fn[c]);
    out.macro += denom > 0 ? 2.0 * double(tp[c]) / denom : 0.0;
  }
  out.macro /= double(present);
  out.micro = 2.0 * double(tp_all) / double(2 * tp_all + fp_all + fn_all);
  return out;
}

std::array<double, 3> ccc_eval(std::span<const std::array<double, 3>> preds,
                               std::span<const std::array<double, 3>> targets) {
  require(preds.size() == targets.size(), ErrorCode::kShapeMismatch,
          "ccc_eval: preds and targets differ in length");
  require(preds.size() >= 2, ErrorCode::kInvalidArgument, "ccc_eval: needs at least 2 samples");
  std::array<double, 3> out{};
  std::vector<double> x(preds.size()), y(preds.size());
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < preds.size(); ++i) {
      x[i] = preds[i][k];
      y[i] = targets[i][k];
    }
    out[k] = loss::ccc(x, y);
  }
  return out;
}

TTestResult t_test(std::span<const double> a, std::span<const double> b) {
  require(a.size() >= 2 && b.size() >= 2, ErrorCode::kInvalidArgument,
          "t_test: needs at least 2 runs per side");
  const double ma = mean_of(a), mb = mean_of(b);
  const double va = sample_variance(a, ma) / double(a.size());
  const double vb = sample_variance(b, mb) / double(b.size());
  TTestResult r;
  if (va + vb == 0.0) {
    r.degenerate = true;
    r.p_value = ma == mb ? 1.0 : 0.0;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(va + vb);
  r.df = (va + vb) * (va + vb) /
         (va * va / double(a.size() - 1) + vb * vb / double(b.size() - 1));
  const boost::math::students_t dist(r.df);
  r.p_value = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))),
                         0.0, 1.0);
  return r;
}

double cosine_distance(std::span<const double> a, std::span<const double> v) {
  require(a.size() == v.size() && !a.empty(), ErrorCode::kShapeMismatch,
          "cosine_distance: dimension mismatch");
  double dot = 0, na = 0, nv = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * v[i];
    na += a[i] * a[i];
    nv += v[i] * v[i];
  }
  require(na > 0 && nv > 0, ErrorCode::kInvalidArgument, "cosine_distance: zero-norm embedding");
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nv));
}

json EmbeddingReport::to_json() const {
  return {{"mean_cosine_distance", mean_distance},
          {"num_samples", distances.size()},
          {"skipped_zero_norm", skipped_zero_norm},
          {"ids", ids},
          {"distances", distances}};
}

EmbeddingReport embedding_analysis(const model::VavlModel<float>& model,
                                   const data::Dataset& dataset,
                                   std::span<const std::size_t> indices) {
  EmbeddingReport report;
  for (std::size_t idx : indices) {
    require(idx < dataset.size(), ErrorCode::kInvalidArgument, "sample index out of range");
    const auto& s = dataset.samples[idx];
    require(s.presence() == data::Presence::kPaired, ErrorCode::kInvalidArgument,
            "embedding_analysis: sample " + s.id + " is not paired");
    const auto a = model::shared_embedding(*s.audio, model);
    const auto v = model::shared_embedding(*s.video, model);
    const auto zero = [](const std::vector<double>& x) {
      return std::all_of(x.begin(), x.end(), [](double e) { return e == 0.0; });
    };
    if (zero(a) || zero(v)) {
      ++report.skipped_zero_norm;
      continue;
    }
    report.ids.push_back(s.id);
    report.distances.push_back(cosine_distance(a, v));
  }
  require(!report.distances.empty(), ErrorCode::kUnavailable,
          "embedding_analysis: no paired sample with non-zero embeddings");
  report.mean_distance = mean_of(report.distances);
  return report;
}

std::map<std::string, double> MetricsReport::metrics() const {
  std::map<std::string, double> out;
  if (f1) {
    out["f1_macro"] = f1->macro;
    out["f1_micro"] = f1->micro;
  }
  if (ccc) {
    for (std::size_t k = 0; k < 3; ++k) out[kAttributeNames[k]] = (*ccc)[k];
    out["ccc_mean"] = ((*ccc)[0] + (*ccc)[1] + (*ccc)[2]) / 3.0;
  }
  return out;
}

json MetricsReport::to_json() const {
  json j = {{"trial", trial},
            {"seed", seed},
            {"condition", model::to_string(condition)},
            {"task", data::to_string(task)},
            {"num_samples", num_samples},
            {"metrics", metrics()}};
  if (!warnings.empty()) j["warnings"] = warnings;
  return j;
}

MetricsReport MetricsReport::from_json(const json& j) {
  MetricsReport r;
  try {
    r.trial = j.at("trial").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.condition = model::condition_from_string(j.at("condition").get<std::string>());
    r.task = data::task_from_string(j.at("task").get<std::string>());
    r.num_samples = j.at("num_samples").get<std::size_t>();
    const auto& m = j.at("metrics");
    if (r.task == data::Task::kClassification) {
      r.f1 = F1Scores{m.at("f1_macro").get<double>(), m.at("f1_micro").get<double>()};
    } else {
      r.ccc = std::array<double, 3>{m.at("ccc_aro").get<double>(), m.at("ccc_val").get<double>(),
                                    m.at("ccc_dom").get<double>()};
    }
    r.warnings = j.value("warnings", std::vector<std::string>{});
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("malformed metrics report: ") + e.what());
  }
  return r;
}

std::vector<std::size_t> compatible(const data::Dataset& dataset,
                                    std::span<const std::size_t> indices, Condition condition) {
  std::vector<std::size_t> out;
  for (std::size_t idx : indices)
    if (train::supports(dataset.samples.at(idx), condition)) out.push_back(idx);
  return out;
}

std::vector<Condition> feasible_conditions(const data::Dataset& dataset,
                                           std::span<const std::size_t> indices) {
  std::vector<Condition> out;
  for (Condition c : {Condition::kAudioVisual, Condition::kAcoustic, Condition::kVisual})
    if (!compatible(dataset, indices, c).empty()) out.push_back(c);
  return out;
}

std::vector<MetricsReport> evaluate(const model::VavlModel<float>& model,
                                    const data::Dataset& dataset,
                                    std::span<const std::size_t> indices,
                                    std::span<const Condition> conditions, int trial,
                                    std::uint64_t seed) {
  require(dataset.task == model.config().task, ErrorCode::kInvalidArgument,
          "dataset task does not match model task");
  std::vector<MetricsReport> reports;
  for (Condition condition : conditions) {
    const auto subset = compatible(dataset, indices, condition);
    require(!subset.empty(), ErrorCode::kUnavailable,
            "condition unavailable: " + model::to_string(condition));
    const auto preds = train::infer(dataset, subset, model, condition);
    MetricsReport r;
    r.condition = condition;
    r.task = dataset.task;
    r.num_samples = subset.size();
    r.trial = trial;
    r.seed = seed;
    if (condition == Condition::kAudioVisual && model.config().fusion == model::Fusion::kAvHead &&
        model.fusion_updates() == 0)
      r.warnings.push_back("unavailable: untrained fusion head");
    if (dataset.task == data::Task::kClassification) {
      std::vector<int> p, y;
      for (std::size_t i = 0; i < subset.size(); ++i) {
        p.push_back(preds[i].argmax());
        y.push_back(std::get<data::Categorical>(dataset.samples[subset[i]].target).class_index);
      }
      r.f1 = f1_scores(p, y, model.config().num_classes);
    } else {
      std::vector<std::array<double, 3>> p, y;
      for (std::size_t i = 0; i < subset.size(); ++i) {
        p.push_back({preds[i].output[0], preds[i].output[1], preds[i].output[2]});
        y.push_back(std::get<data::Attributes>(dataset.samples[subset[i]].target).values);
      }
      r.ccc = ccc_eval(p, y);
    }
    reports.push_back(std::move(r));
  }
  return reports;
}

AggregateTable aggregate(std::span<const MetricsReport> reports) {
  AggregateTable t;
  for (Condition c : {Condition::kAudioVisual, Condition::kAcoustic, Condition::kVisual})
    if (std::any_of(reports.begin(), reports.end(), [&](const auto& r) { return r.condition == c; }))
      t.conditions.push_back(c);
  std::map<std::pair<std::string, Condition>, double> sums;
  for (const auto& r : reports)
    for (const auto& [name, value] : r.metrics()) {
      if (std::find(t.metrics.begin(), t.metrics.end(), name) == t.metrics.end())
        t.metrics.push_back(name);
      sums[{name, r.condition}] += value;
      ++t.count[{name, r.condition}];
    }
  std::sort(t.metrics.begin(), t.metrics.end());
  for (const auto& [key, sum] : sums) t.mean[key] = sum / double(t.count[key]);
  return t;
}

std::string AggregateTable::to_csv() const {
  std::ostringstream out;
  out << "metric";
  for (Condition c : conditions) out << ',' << model::to_string(c);
  out << '\n' << std::setprecision(6) << std::fixed;
  for (const auto& m : metrics) {
    out << m;
    for (Condition c : conditions) {
      out << ',';
      if (auto it = mean.find({m, c}); it != mean.end()) out << it->second;
    }
    out << '\n';
  }
  return out.str();
}

std::string AggregateTable::to_text() const {
  std::ostringstream out;
  out << std::left << std::setw(10) << "metric";
  for (Condition c : conditions) out << std::right << std::setw(10) << model::to_string(c);
  out << '\n' << std::fixed << std::setprecision(4);
  for (const auto& m : metrics) {
    out << std::left << std::setw(10) << m;
    for (Condition c : conditions) {
      out << std::right << std::setw(10);
      if (auto it = mean.find({m, c}); it != mean.end()) {
        out << it->second;
      } else {
        out << "-";
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace vavl::eval

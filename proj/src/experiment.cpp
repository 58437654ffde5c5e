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

#include "vavl/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "vavl/checkpoint.hpp"

namespace vavl::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  require(out.good(), ErrorCode::kIo, "write failed: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, path.string() + ": " + e.what());
  }
}

// Task, class count and feature widths always follow the dataset.
model::ModelConfig bind_to_dataset(model::ModelConfig config, const data::Dataset& dataset) {
  config.task = dataset.task;
  if (dataset.task == data::Task::kClassification) config.num_classes = dataset.num_classes;
  config.acoustic_dim = dataset.acoustic_dim;
  config.visual_dim = dataset.visual_dim;
  config.validate();
  return config;
}

json error_record(const std::exception& e) {
  if (const auto* v = dynamic_cast<const Error*>(&e))
    return {{"code", to_string(v->code())}, {"message", v->what()}};
  return {{"code", "internal"}, {"message", e.what()}};
}

}  // namespace

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::kNone: return "none";
    case Ablation::kNoResidual: return "no-residual";
    case Ablation::kNoReconstruction: return "no-recon";
    case Ablation::kAverageFusion: return "avg-fusion";
  }
  return "unknown";
}

Ablation ablation_from_string(const std::string& s) {
  for (Ablation a : {Ablation::kNone, Ablation::kNoResidual, Ablation::kNoReconstruction,
                     Ablation::kAverageFusion})
    if (to_string(a) == s) return a;
  fail(ErrorCode::kInvalidArgument,
       "unknown ablation: " + s + " (expected none|no-residual|no-recon|avg-fusion)");
}

model::ModelConfig apply_ablation(model::ModelConfig config, Ablation ablation) {
  switch (ablation) {
    case Ablation::kNone: break;
    case Ablation::kNoResidual: config.use_residual = false; break;
    case Ablation::kNoReconstruction: config.use_reconstruction = false; break;
    case Ablation::kAverageFusion: config.fusion = model::Fusion::kAverageUnimodal; break;
  }
  return config;
}

void ExperimentConfig::validate() const {
  require(dataset.manifest.has_value() != dataset.synth.has_value(), ErrorCode::kInvalidArgument,
          "dataset needs exactly one of \"manifest\" and \"synth\"");
  require(trials >= 1, ErrorCode::kInvalidArgument, "trials must be >= 1");
  require(!out.empty(), ErrorCode::kInvalidArgument, "output directory is required");
  model.validate();
  train.validate();
}

ExperimentConfig experiment_config_from_json(const json& j, const fs::path& base_dir) {
  ExperimentConfig c;
  try {
    const auto& ds = j.at("dataset");
    if (ds.contains("manifest")) {
      fs::path p = ds["manifest"].get<std::string>();
      c.dataset.manifest = p.is_absolute() ? p : base_dir / p;
    }
    if (ds.contains("synth")) c.dataset.synth = data::synth_spec_from_json(ds["synth"]);
    c.dataset.synth_seed = ds.value("seed", std::uint64_t{0});
    if (j.contains("model")) c.model = model::model_config_from_json(j["model"]);
    if (j.contains("train")) c.train = train::train_config_from_json(j["train"]);
    if (j.contains("splits")) {
      const auto& s = j["splits"];
      c.splits = {s.value("train", c.splits.train), s.value("dev", c.splits.dev),
                  s.value("test", c.splits.test)};
    }
    c.trials = j.value("trials", c.trials);
    c.ablation = ablation_from_string(j.value("ablation", std::string("none")));
    if (j.contains("out")) {
      fs::path p = j["out"].get<std::string>();
      c.out = p.is_absolute() ? p : base_dir / p;
    }
    c.embedding_analysis = j.value("embedding_analysis", c.embedding_analysis);
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("malformed experiment config: ") + e.what());
  }
  return c;
}

json to_json(const ExperimentConfig& c) {
  json ds = {{"seed", c.dataset.synth_seed}};
  if (c.dataset.manifest) ds["manifest"] = c.dataset.manifest->string();
  if (c.dataset.synth) ds["synth"] = data::to_json(*c.dataset.synth);
  return {{"dataset", ds},
          {"model", model::to_json(c.model)},
          {"train", train::to_json(c.train)},
          {"splits", {{"train", c.splits.train}, {"dev", c.splits.dev}, {"test", c.splits.test}}},
          {"trials", c.trials},
          {"ablation", to_string(c.ablation)},
          {"out", c.out.string()},
          {"embedding_analysis", c.embedding_analysis}};
}

data::Dataset load_source(const DatasetSource& source) {
  if (source.manifest) return data::load_manifest(*source.manifest);
  require(source.synth.has_value(), ErrorCode::kInvalidArgument, "no dataset source");
  return data::generate_synthetic(*source.synth, source.synth_seed);
}

ExperimentSummary run_experiment(const ExperimentConfig& config) {
  config.validate();
  fs::create_directories(config.out);
  write_text(config.out / "config.json", to_json(config).dump(2) + "\n");

  const data::Dataset dataset = load_source(config.dataset);
  const model::ModelConfig model_config =
      bind_to_dataset(apply_ablation(config.model, config.ablation), dataset);

  ExperimentSummary summary;
  std::ostringstream run_log;
  for (int t = 0; t < config.trials; ++t) {
    TrialOutcome outcome;
    outcome.trial = t;
    outcome.seed = config.train.seed + static_cast<std::uint64_t>(t);
    const fs::path dir = config.out / ("trial_" + std::to_string(t));
    try {
      fs::create_directories(dir);
      train::TrainConfig tc = config.train;
      tc.seed = outcome.seed;
      const auto splits = data::make_splits(dataset, config.splits, outcome.seed);
      auto result = train::train(dataset, splits, model_config, tc);

      const auto test_idx = splits.indices(dataset, data::Split::kTest);
      const auto conditions = eval::feasible_conditions(dataset, test_idx);
      auto reports = eval::evaluate(result.model, dataset, test_idx, conditions, t, outcome.seed);

      json report = {{"trial", t},
                     {"seed", outcome.seed},
                     {"ablation", to_string(config.ablation)},
                     {"selected_epoch", result.history.selected_epoch},
                     {"selection_condition", model::to_string(result.history.selection_condition)},
                     {"reports", json::array()}};
      for (const auto& r : reports) report["reports"].push_back(r.to_json());
      if (!result.history.warnings.empty()) report["warnings"] = result.history.warnings;
      const auto paired = eval::compatible(dataset, test_idx, model::Condition::kAudioVisual);
      if (config.embedding_analysis && !paired.empty())
        report["embedding"] = eval::embedding_analysis(result.model, dataset, paired).to_json();

      num::save_checkpoint(dir / "checkpoint.vavc",
                           result.model.to_checkpoint({{"trial", t}, {"seed", outcome.seed}}));
      write_text(dir / "report.json", report.dump(2) + "\n");
      write_text(dir / "train_log.jsonl", result.history.to_jsonl());
      summary.reports.insert(summary.reports.end(), reports.begin(), reports.end());
      outcome.ok = true;
      run_log << json{{"trial", t}, {"seed", outcome.seed}, {"status", "ok"}}.dump() << '\n';
    } catch (const std::exception& e) {
      outcome.error = e.what();
      run_log << json{{"trial", t}, {"seed", outcome.seed}, {"status", "error"},
                      {"error", error_record(e)}}.dump()
              << '\n';
    }
    summary.trials.push_back(outcome);
  }
  write_text(config.out / "run_log.jsonl", run_log.str());
  summary.table = eval::aggregate(summary.reports);
  write_text(config.out / "aggregate.csv", summary.table.to_csv());
  write_text(config.out / "aggregate.txt", summary.table.to_text());
  return summary;
}

std::vector<eval::MetricsReport> load_reports(const fs::path& dir) {
  require(fs::is_directory(dir), ErrorCode::kIo, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto report = entry.path() / "report.json";
    if (entry.is_directory() && entry.path().filename().string().starts_with("trial_") &&
        fs::exists(report))
      files.push_back(report);
  }
  std::sort(files.begin(), files.end());
  std::vector<eval::MetricsReport> out;
  for (const auto& f : files) {
    const json j = read_json(f);
    require(j.contains("reports") && j["reports"].is_array(), ErrorCode::kFormat,
            f.string() + ": missing reports array");
    for (const auto& r : j["reports"]) out.push_back(eval::MetricsReport::from_json(r));
  }
  return out;
}

std::vector<ComparisonRow> compare(const fs::path& dir_a, const fs::path& dir_b,
                                   const std::string& metric) {
  const auto ra = load_reports(dir_a), rb = load_reports(dir_b);
  require(!ra.empty() && !rb.empty(), ErrorCode::kInvalidArgument,
          "both directories need trial reports");
  for (const auto& r : rb)
    require(r.task == ra.front().task, ErrorCode::kInvalidArgument,
            "cannot compare experiments of different task types");
  for (const auto& r : ra)
    require(r.task == ra.front().task, ErrorCode::kInvalidArgument, "mixed task types in " +
                                                                         dir_a.string());

  auto collect = [&](const std::vector<eval::MetricsReport>& reports) {
    std::map<model::Condition, std::vector<double>> by;
    for (const auto& r : reports) {
      const auto m = r.metrics();
      const auto it = m.find(metric);
      require(it != m.end(), ErrorCode::kInvalidArgument, "metric absent: " + metric);
      by[r.condition].push_back(it->second);
    }
    return by;
  };
  const auto a = collect(ra), b = collect(rb);
  std::vector<ComparisonRow> rows;
  for (const auto& [condition, values_a] : a) {
    const auto it = b.find(condition);
    if (it == b.end()) continue;
    ComparisonRow row;
    row.condition = condition;
    row.test = eval::t_test(values_a, it->second);
    row.mean_a = std::accumulate(values_a.begin(), values_a.end(), 0.0) / double(values_a.size());
    row.mean_b =
        std::accumulate(it->second.begin(), it->second.end(), 0.0) / double(it->second.size());
    row.significant = row.test.p_value < 0.05;
    rows.push_back(row);
  }
  require(!rows.empty(), ErrorCode::kInvalidArgument, "no condition common to both experiments");
  return rows;
}

json to_json(const std::vector<ComparisonRow>& rows, const std::string& metric) {
  json out = {{"metric", metric}, {"rows", json::array()}};
  for (const auto& r : rows)
    out["rows"].push_back({{"condition", model::to_string(r.condition)},
                           {"mean_a", r.mean_a},
                           {"mean_b", r.mean_b},
                           {"t", r.test.t},
                           {"df", r.test.df},
                           {"p_value", r.test.p_value},
                           {"degenerate", r.test.degenerate},
                           {"significant", r.significant}});
  return out;
}

}  // namespace vavl::cli

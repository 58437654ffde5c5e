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

// vavl_cli: train / eval / embed-analysis / synth / compare.
// Results go to stdout as JSON; failures print {"error": {...}} on stderr.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vavl/checkpoint.hpp"
#include "vavl/evalkit.hpp"
#include "vavl/experiment.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vavl;

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, path.string() + ": " + e.what());
  }
}

int report_error(const std::string& code, const std::string& message, int status) {
  std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump() << std::endl;
  return status;
}

model::VavlModel<float> load_model(const fs::path& ckpt) {
  return model::VavlModel<float>::from_checkpoint(num::load_checkpoint(ckpt));
}

data::Dataset load_for(const fs::path& manifest, const model::VavlModel<float>& m) {
  return data::load_manifest(manifest, {m.config().acoustic_dim, m.config().visual_dim});
}

std::vector<std::size_t> all_indices(const data::Dataset& ds) {
  std::vector<std::size_t> idx(ds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Versatile audio-visual emotion recognition experiments"};
  app.require_subcommand(1);

  fs::path config_path, out_dir;
  std::string ablation;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<std::size_t> epochs;
  auto* train_cmd = app.add_subcommand("train", "run the multi-trial training protocol");
  train_cmd->add_option("--config", config_path, "experiment JSON")->required();
  train_cmd->add_option("--out", out_dir, "output directory (overrides config)");
  train_cmd->add_option("--ablation", ablation, "none|no-residual|no-recon|avg-fusion");
  train_cmd->add_option("--seed", seed, "base seed (overrides config)");
  train_cmd->add_option("--trials", trials, "number of trials (overrides config)");
  train_cmd->add_option("--epochs", epochs, "epochs per trial (overrides config)");

  fs::path ckpt, manifest;
  std::string condition;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
  eval_cmd->add_option("--ckpt", ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--manifest", manifest, "dataset manifest")->required();
  eval_cmd->add_option("--condition", condition, "av|a|v (default: all feasible)");

  auto* embed_cmd = app.add_subcommand("embed-analysis", "shared-embedding cosine distances");
  embed_cmd->add_option("--ckpt", ckpt, "checkpoint file")->required();
  embed_cmd->add_option("--manifest", manifest, "dataset manifest")->required();

  fs::path spec_path;
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset");
  synth_cmd->add_option("--spec", spec_path, "synthetic spec JSON")->required();
  synth_cmd->add_option("--out", out_dir, "output directory")->required();
  synth_cmd->add_option("--seed", seed, "generator seed (default 0)");

  fs::path dir_a, dir_b;
  std::string metric;
  auto* compare_cmd = app.add_subcommand("compare", "Welch t-test between two experiments");
  compare_cmd->add_option("--a", dir_a, "experiment directory")->required();
  compare_cmd->add_option("--b", dir_b, "experiment directory")->required();
  compare_cmd->add_option("--metric", metric, "metric name, e.g. f1_macro or ccc_mean")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), 2);
  }

  try {
    if (*train_cmd) {
      auto config = cli::experiment_config_from_json(read_json_file(config_path),
                                                     config_path.parent_path());
      if (!out_dir.empty()) config.out = out_dir;
      if (!ablation.empty()) config.ablation = cli::ablation_from_string(ablation);
      if (seed) config.train.seed = *seed;
      if (trials) config.trials = *trials;
      if (epochs) config.train.epochs = *epochs;
      const auto summary = cli::run_experiment(config);
      json result = {{"out", config.out.string()}, {"trials", json::array()}};
      int failed = 0;
      for (const auto& t : summary.trials) {
        json entry = {{"trial", t.trial}, {"seed", t.seed}, {"ok", t.ok}};
        if (!t.ok) entry["error"] = t.error, ++failed;
        result["trials"].push_back(entry);
      }
      std::cout << result.dump(2) << '\n' << summary.table.to_text();
      if (failed == config.trials) return report_error("failed", "every trial failed", 1);
      return 0;
    }
    if (*eval_cmd) {
      const auto model = load_model(ckpt);
      const auto ds = load_for(manifest, model);
      const auto idx = all_indices(ds);
      std::vector<model::Condition> conditions =
          condition.empty() ? eval::feasible_conditions(ds, idx)
                            : std::vector{model::condition_from_string(condition)};
      json out = json::array();
      for (const auto& r : eval::evaluate(model, ds, idx, conditions)) out.push_back(r.to_json());
      std::cout << out.dump(2) << '\n';
      return 0;
    }
    if (*embed_cmd) {
      const auto model = load_model(ckpt);
      const auto ds = load_for(manifest, model);
      const auto paired = eval::compatible(ds, all_indices(ds), model::Condition::kAudioVisual);
      std::cout << eval::embedding_analysis(model, ds, paired).to_json().dump(2) << '\n';
      return 0;
    }
    if (*synth_cmd) {
      const auto spec = data::synth_spec_from_json(read_json_file(spec_path));
      const auto ds = data::generate_synthetic(spec, seed.value_or(0));
      const auto path = data::write_dataset(out_dir, ds);
      std::cout << json{{"manifest", path.string()}, {"samples", ds.size()}}.dump(2) << '\n';
      return 0;
    }
    if (*compare_cmd) {
      std::cout << cli::to_json(cli::compare(dir_a, dir_b, metric), metric).dump(2) << '\n';
      return 0;
    }
  } catch (const Error& e) {
    return report_error(std::string(to_string(e.code())), e.what(), 1);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 1);
  }
  return 0;
}

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

#include "vavl/trainer.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "vavl/evalkit.hpp"

namespace vavl::train {
using data::Modality;
using data::Presence;
using nlohmann::json;

namespace {

constexpr std::uint64_t kInitStream = 0x1a17;
constexpr std::uint64_t kDataStream = 0xda7a;
constexpr std::uint64_t kDropoutStream = 0xd209;

std::vector<int> class_labels(const data::Batch& batch) {
  std::vector<int> labels;
  labels.reserve(batch.size());
  for (const auto& t : batch.targets) {
    const auto* c = std::get_if<data::Categorical>(&t);
    require(c != nullptr, ErrorCode::kInvalidArgument, "task mismatch: expected class targets");
    labels.push_back(c->class_index);
  }
  return labels;
}

num::Tensor<float> attribute_targets(const data::Batch& batch) {
  num::Tensor<float> out({batch.size(), 3});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto* a = std::get_if<data::Attributes>(&batch.targets[i]);
    require(a != nullptr, ErrorCode::kInvalidArgument, "task mismatch: expected attribute targets");
    for (std::size_t k = 0; k < 3; ++k) out.data[i * 3 + k] = static_cast<float>(a->values[k]);
  }
  return out;
}

num::Var<float> prediction_loss(const num::Var<float>& pred, const data::Batch& batch,
                                data::Task task) {
  if (task == data::Task::kClassification) return loss::cross_entropy(pred, class_labels(batch));
  return loss::ccc_loss(pred, attribute_targets(batch));
}

std::string metric_name(SelectionMetric m) {
  return m == SelectionMetric::kMacroF1 ? "macro_f1" : "mean_ccc";
}

struct Running {
  double sum = 0.0;
  std::size_t n = 0;
  void add(double v) { sum += v, ++n; }
  std::optional<double> mean() const {
    return n ? std::optional<double>(sum / double(n)) : std::nullopt;
  }
};

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

void TrainConfig::validate() const {
  require(epochs >= 1, ErrorCode::kInvalidArgument, "epochs must be >= 1");
  require(lr >= 0.0, ErrorCode::kInvalidArgument, "learning rate must be non-negative");
  require(batch_size >= 1, ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  require(alpha >= 0.0, ErrorCode::kInvalidArgument, "alpha must be non-negative");
}

SelectionMetric TrainConfig::metric_for(data::Task task) const {
  if (selection_metric) return *selection_metric;
  return task == data::Task::kClassification ? SelectionMetric::kMacroF1
                                             : SelectionMetric::kMeanCcc;
}

json to_json(const TrainConfig& c) {
  json j = {{"epochs", c.epochs},
            {"lr", c.lr},
            {"batch_size", c.batch_size},
            {"alpha", c.alpha},
            {"seed", c.seed},
            {"selection_condition",
             c.selection_condition == SelectionCondition::kAudioVisual ? "av" : "best_available"},
            {"audit", c.audit}};
  if (c.selection_metric) j["selection_metric"] = metric_name(*c.selection_metric);
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.lr = j.value("lr", c.lr);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.alpha = j.value("alpha", c.alpha);
    c.seed = j.value("seed", c.seed);
    c.audit = j.value("audit", c.audit);
    if (j.contains("selection_metric")) {
      const auto m = j["selection_metric"].get<std::string>();
      require(m == "macro_f1" || m == "mean_ccc", ErrorCode::kFormat,
              "unknown selection_metric: " + m);
      c.selection_metric = m == "macro_f1" ? SelectionMetric::kMacroF1 : SelectionMetric::kMeanCcc;
    }
    if (j.contains("selection_condition")) {
      const auto s = j["selection_condition"].get<std::string>();
      require(s == "av" || s == "best_available", ErrorCode::kFormat,
              "unknown selection_condition: " + s);
      c.selection_condition =
          s == "av" ? SelectionCondition::kAudioVisual : SelectionCondition::kBestAvailable;
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("malformed train config: ") + e.what());
  }
  c.validate();
  return c;
}

Trainer::Trainer(VavlModel<float>& model, const TrainConfig& config)
    : model_(&model), config_(config), dropout_rng_(mix_seed(config.seed, kDropoutStream)) {
  config_.validate();
  const num::AdamConfig adam{.lr = config_.lr};
  for (GroupId id : num::kAllGroups) optimizers_.emplace_back(model.group(id), adam);
}

std::array<std::uint64_t, 4> Trainer::checksums() const {
  std::array<std::uint64_t, 4> out{};
  for (GroupId id : num::kAllGroups)
    out[static_cast<int>(id)] = num::checksum(model_->group(id));
  return out;
}

loss::LossValue Trainer::unimodal_pass(Modality modality, const data::Batch& batch) {
  const bool acoustic = modality == Modality::kAcoustic;
  const auto input =
      model::SequenceInput<float>::from_padded(acoustic ? batch.audio : batch.video);
  const auto out =
      model_->forward_unimodal(modality, input, nn::ForwardContext::train(dropout_rng_));
  const auto pred = prediction_loss(out.pred, batch, model_->config().task);
  num::Var<float> recon;
  if (out.recon) {
    recon = loss::mse(out.recon, out.pooled_input);
  }
  const auto total = loss::combine(pred, recon, config_.alpha);
  num::GradMap<float> grads;
  try {
    grads = num::backward(total);
  } catch (const Error& e) {
    fail(e.code(), data::to_string(modality) + " pass: " + e.what());
  }
  optimizers_[static_cast<int>(acoustic ? GroupId::kThetaA : GroupId::kThetaV)].step(grads);
  optimizers_[static_cast<int>(GroupId::kThetaS)].step(grads);
  return loss::total_loss(pred->value[0], recon ? recon->value[0] : 0.0, config_.alpha,
                          recon != nullptr);
}

double Trainer::audiovisual_pass(const data::Batch& batch) {
  auto& m = *model_;
  num::FreezeGuard<float> frozen({&m.group(GroupId::kThetaA), &m.group(GroupId::kThetaV),
                                  &m.group(GroupId::kThetaS)});
  const auto audio = model::SequenceInput<float>::from_padded(batch.audio);
  const auto video = model::SequenceInput<float>::from_padded(batch.video);
  const auto pred =
      m.forward_audiovisual(audio, video, nn::ForwardContext::train(dropout_rng_));
  const auto loss = prediction_loss(pred, batch, m.config().task);
  num::GradMap<float> grads;
  try {
    grads = num::backward(loss);
  } catch (const Error& e) {
    fail(e.code(), std::string("audio-visual pass: ") + e.what());
  }
  optimizers_[static_cast<int>(GroupId::kThetaAV)].step(grads);
  m.set_fusion_updates(m.fusion_updates() + 1);
  return loss->value[0];
}

StepReport Trainer::step(const data::Batch& batch) {
  require(batch.size() >= 1, ErrorCode::kInvalidArgument, "empty batch");
  StepReport report;
  report.presence = batch.presence;
  report.batch_size = batch.size();
  if (model_->config().task == data::Task::kRegression && batch.size() < 2) {
    report.skipped = true;
    warnings_.push_back("dropped size-1 regression batch (" + batch.ids.front() + ")");
    return report;
  }

  auto audited = [&](const char* name, auto&& fn) {
    SubstepAudit audit;
    audit.substep = name;
    if (config_.audit) audit.before = checksums();
    auto value = fn();
    if (config_.audit) {
      audit.after = checksums();
      report.audits.push_back(audit);
    }
    return value;
  };

  const bool has_audio = batch.presence != Presence::kVideoOnly;
  const bool has_video = batch.presence != Presence::kAudioOnly;
  if (has_audio)
    report.acoustic = audited("acoustic", [&] { return unimodal_pass(Modality::kAcoustic, batch); });
  if (has_video)
    report.visual = audited("visual", [&] { return unimodal_pass(Modality::kVisual, batch); });
  if (has_audio && has_video && model_->config().fusion == model::Fusion::kAvHead)
    report.av = audited("av", [&] { return audiovisual_pass(batch); });
  return report;
}

std::string TrainHistory::to_jsonl() const {
  std::ostringstream out;
  for (const auto& e : epochs) {
    const json line = {{"epoch", e.epoch},
                       {"losses",
                        {{"a", optional_json(e.loss_a)},
                         {"v", optional_json(e.loss_v)},
                         {"av", optional_json(e.loss_av)}}},
                       {"dev_metrics", e.dev_metrics},
                       {"selection_value", e.selection_value},
                       {"selected", e.selected}};
    out << line.dump() << '\n';
  }
  return out.str();
}

bool supports(const data::Sample& sample, Condition condition) {
  switch (condition) {
    case Condition::kAudioVisual: return sample.audio && sample.video;
    case Condition::kAcoustic: return sample.audio.has_value();
    case Condition::kVisual: return sample.video.has_value();
  }
  return false;
}

std::vector<model::Prediction> infer(const data::Dataset& dataset,
                                     std::span<const std::size_t> indices,
                                     const VavlModel<float>& model,
                                     std::optional<Condition> forced) {
  std::vector<model::Prediction> out;
  out.reserve(indices.size());
  for (std::size_t idx : indices) {
    require(idx < dataset.size(), ErrorCode::kInvalidArgument, "sample index out of range");
    const data::Sample& sample = dataset.samples[idx];
    if (!forced) {
      out.push_back(model::predict(sample, model));
      continue;
    }
    require(supports(sample, *forced), ErrorCode::kUnavailable,
            "sample " + sample.id + " lacks a modality required by condition " +
                model::to_string(*forced));
    data::Sample view;
    view.id = sample.id;
    view.speaker = sample.speaker;
    view.target = sample.target;
    if (*forced != Condition::kVisual) view.audio = sample.audio;
    if (*forced != Condition::kAcoustic) view.video = sample.video;
    out.push_back(model::predict(view, model));
  }
  return out;
}

TrainResult train(const data::Dataset& dataset, const data::SplitAssignment& splits,
                  const model::ModelConfig& model_config, const TrainConfig& config) {
  config.validate();
  model_config.validate();
  require(dataset.task == model_config.task, ErrorCode::kInvalidArgument,
          "dataset task does not match model task");
  require(dataset.task == data::Task::kRegression ||
              dataset.num_classes == model_config.num_classes,
          ErrorCode::kInvalidArgument, "dataset and model disagree on the number of classes");
  require(dataset.acoustic_dim == model_config.acoustic_dim &&
              dataset.visual_dim == model_config.visual_dim,
          ErrorCode::kShapeMismatch, "dataset feature widths do not match the model");
  const auto train_idx = splits.indices(dataset, data::Split::kTrain);
  const auto dev_idx = splits.indices(dataset, data::Split::kDev);
  require(!train_idx.empty(), ErrorCode::kInvalidArgument, "empty train split");
  require(!dev_idx.empty(), ErrorCode::kInvalidArgument, "empty dev split");

  VavlModel<float> model(model_config, mix_seed(config.seed, kInitStream));
  Trainer trainer(model, config);
  const SelectionMetric metric = config.metric_for(dataset.task);

  auto has = [&](std::span<const std::size_t> idx, Presence p) {
    return std::any_of(idx.begin(), idx.end(),
                       [&](std::size_t i) { return dataset.samples[i].presence() == p; });
  };
  // The audio-visual condition only says something about the fusion path
  // if that path can be trained.
  const bool av_selectable =
      has(dev_idx, Presence::kPaired) &&
      (model_config.fusion == model::Fusion::kAverageUnimodal || has(train_idx, Presence::kPaired));
  std::vector<Condition> candidates;
  for (Condition c : eval::feasible_conditions(dataset, dev_idx)) {
    if (c == Condition::kAudioVisual && !av_selectable) continue;
    candidates.push_back(c);
  }
  require(!candidates.empty(), ErrorCode::kUnavailable, "no dev condition available");
  if (config.selection_condition == SelectionCondition::kAudioVisual && av_selectable)
    candidates = {Condition::kAudioVisual};

  TrainHistory history;
  // Returns the condition that produced the selection value.
  auto evaluate_dev = [&](EpochRecord& record) {
    const auto reports = eval::evaluate(model, dataset, dev_idx, candidates);
    double best = -std::numeric_limits<double>::infinity();
    Condition chosen = reports.front().condition;
    for (const auto& r : reports) {
      const auto values = r.metrics();
      record.dev_metrics[model::to_string(r.condition)] = values;
      const double v = values.at(metric == SelectionMetric::kMacroF1 ? "f1_macro" : "ccc_mean");
      if (v > best) {
        best = v;
        chosen = r.condition;
      }
    }
    record.selection_value = best;
    return chosen;
  };

  EpochRecord initial;
  history.selection_condition = evaluate_dev(initial);
  history.epochs.push_back(initial);

  std::vector<num::Tensor<float>> best_params;
  std::uint64_t best_fusion_updates = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  const std::uint64_t data_seed = mix_seed(config.seed, kDataStream);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Running a, v, av;
    for (const auto& batch :
         data::batch_epoch(dataset, train_idx, config.batch_size, data_seed, epoch)) {
      const StepReport r = trainer.step(batch);
      if (r.acoustic) a.add(r.acoustic->total);
      if (r.visual) v.add(r.visual->total);
      if (r.av) av.add(*r.av);
    }
    EpochRecord record;
    record.epoch = epoch;
    record.loss_a = a.mean();
    record.loss_v = v.mean();
    record.loss_av = av.mean();
    const Condition condition = evaluate_dev(record);
    if (record.selection_value > best_value || best_params.empty()) {
      best_value = record.selection_value;
      best_params = model.snapshot();
      best_fusion_updates = model.fusion_updates();
      history.selected_epoch = epoch;
      history.selection_condition = condition;
    }
    history.epochs.push_back(std::move(record));
  }
  for (GroupId id : num::kAllGroups)
    history.optimizer_steps[static_cast<int>(id)] = trainer.optimizer_steps(id);
  history.warnings = trainer.warnings();
  history.epochs[history.selected_epoch].selected = true;
  model.restore(best_params);
  model.set_fusion_updates(best_fusion_updates);
  return TrainResult{std::move(model), std::move(history)};
}

}  // namespace vavl::train

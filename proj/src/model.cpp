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

#include "vavl/model.hpp"

#include <algorithm>

#include "vavl/ops.hpp"

namespace vavl::model {
using data::Modality;
using nlohmann::json;

namespace {

// Independent init streams so that ablations share the initialization of
// every component they keep.
enum InitStream : std::uint64_t {
  kAcousticEncoder = 1,
  kAcousticHead,
  kAcousticRecon,
  kVisualEncoder,
  kVisualHead,
  kVisualRecon,
  kSharedEncoder,
  kFusionHead,
};

}  // namespace

std::string to_string(Fusion f) { return f == Fusion::kAvHead ? "av_head" : "average"; }

std::string to_string(Condition c) {
  switch (c) {
    case Condition::kAudioVisual: return "av";
    case Condition::kAcoustic: return "a";
    case Condition::kVisual: return "v";
  }
  return "unknown";
}

Condition condition_from_string(const std::string& s) {
  if (s == "av") return Condition::kAudioVisual;
  if (s == "a") return Condition::kAcoustic;
  if (s == "v") return Condition::kVisual;
  fail(ErrorCode::kInvalidArgument, "unknown condition: " + s + " (expected av|a|v)");
}

void ModelConfig::validate() const {
  encoder.validate();
  require(task == data::Task::kRegression || num_classes >= 2, ErrorCode::kInvalidArgument,
          "classification needs at least 2 classes");
  require(head_hidden1 >= 1 && head_hidden2 >= 1, ErrorCode::kInvalidArgument,
          "head widths must be positive");
  require(head_dropout >= 0.0 && head_dropout < 1.0, ErrorCode::kInvalidArgument,
          "head dropout must be in [0, 1)");
  require(acoustic_dim >= 1 && visual_dim >= 1, ErrorCode::kInvalidArgument,
          "input dims must be positive");
}

ModelConfig ModelConfig::preset(const std::string& name) {
  ModelConfig c;
  if (name == "base-50d") return c;
  if (name == "wide-512d") {
    c.encoder.d_model = 512;
    c.encoder.num_heads = 8;
    return c;
  }
  if (name == "toy") {
    c.encoder.d_model = 16;
    c.encoder.ffn_hidden = 32;
    c.encoder.num_heads = 2;
    c.encoder.conv_kernel = 3;
    c.head_hidden1 = 32;
    c.head_hidden2 = 16;
    c.acoustic_dim = 16;
    c.visual_dim = 16;
    c.num_classes = 4;
    return c;
  }
  fail(ErrorCode::kInvalidArgument, "unknown model preset: " + name);
}

json to_json(const ModelConfig& c) {
  return {{"encoder", nn::to_json(c.encoder)},
          {"task", data::to_string(c.task)},
          {"num_classes", c.num_classes},
          {"head_hidden", {c.head_hidden1, c.head_hidden2}},
          {"head_dropout", c.head_dropout},
          {"acoustic_dim", c.acoustic_dim},
          {"visual_dim", c.visual_dim},
          {"fusion", to_string(c.fusion)},
          {"use_residual", c.use_residual},
          {"use_reconstruction", c.use_reconstruction}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c = j.contains("preset") ? ModelConfig::preset(j["preset"].get<std::string>())
                                       : ModelConfig{};
  try {
    if (j.contains("encoder")) {
      json enc = nn::to_json(c.encoder);
      enc.update(j["encoder"]);
      c.encoder = nn::encoder_config_from_json(enc);
    }
    if (j.contains("task")) c.task = data::task_from_string(j["task"].get<std::string>());
    c.num_classes = j.value("num_classes", c.num_classes);
    if (j.contains("head_hidden")) {
      c.head_hidden1 = j["head_hidden"].at(0).get<std::size_t>();
      c.head_hidden2 = j["head_hidden"].at(1).get<std::size_t>();
    }
    c.head_dropout = j.value("head_dropout", c.head_dropout);
    c.acoustic_dim = j.value("acoustic_dim", c.acoustic_dim);
    c.visual_dim = j.value("visual_dim", c.visual_dim);
    if (j.contains("fusion")) {
      const auto f = j["fusion"].get<std::string>();
      require(f == "av_head" || f == "average", ErrorCode::kFormat, "unknown fusion: " + f);
      c.fusion = f == "av_head" ? Fusion::kAvHead : Fusion::kAverageUnimodal;
    }
    c.use_residual = j.value("use_residual", c.use_residual);
    c.use_reconstruction = j.value("use_reconstruction", c.use_reconstruction);
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("malformed model config: ") + e.what());
  }
  c.validate();
  return c;
}

template <typename Real>
SequenceInput<Real> SequenceInput<Real>::from_padded(const data::PaddedFrames& padded) {
  require(!padded.empty(), ErrorCode::kInvalidArgument, "empty padded batch");
  Tensor<Real> frames({padded.batch * padded.max_len, padded.dim});
  std::copy(padded.values.begin(), padded.values.end(), frames.data.begin());
  return {num::constant(std::move(frames)), SeqLayout{padded.batch, padded.max_len, padded.lengths}};
}

template <typename Real>
SequenceInput<Real> SequenceInput<Real>::from_sequence(const data::FeatureSequence& seq) {
  Tensor<Real> frames({seq.frames, seq.dim});
  std::copy(seq.values.begin(), seq.values.end(), frames.data.begin());
  return {num::constant(std::move(frames)), SeqLayout::single(seq.frames)};
}

template <typename Real>
Mlp<Real>::Mlp(nn::ParamFactory<Real> f, std::size_t in, std::size_t hidden1,
               std::size_t hidden2, std::size_t out, double dropout)
    : l1_(f.scoped("fc1"), in, hidden1),
      l2_(f.scoped("fc2"), hidden1, hidden2),
      l3_(f.scoped("out"), hidden2, out),
      dropout_(static_cast<Real>(dropout)) {}

template <typename Real>
Var<Real> Mlp<Real>::operator()(const Var<Real>& x, const nn::ForwardContext& ctx) const {
  Var<Real> h = num::dropout(num::relu(l1_(x)), dropout_, ctx.dropout_rng());
  h = num::dropout(num::relu(l2_(h)), dropout_, ctx.dropout_rng());
  return l3_(h);
}

template <typename Real>
VavlModel<Real>::VavlModel(ModelConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      groups_{ParameterGroup<Real>(GroupId::kThetaA), ParameterGroup<Real>(GroupId::kThetaV),
              ParameterGroup<Real>(GroupId::kThetaS), ParameterGroup<Real>(GroupId::kThetaAV)} {
  config_.validate();
  const auto& enc = config_.encoder;
  const std::size_t d = enc.d_model, out = config_.output_dim();

  auto make_branch = [&](ParameterGroup<Real>& group, const std::string& prefix,
                         std::size_t input_dim, std::size_t layers, std::uint64_t encoder_stream,
                         std::uint64_t head_stream, std::uint64_t recon_stream) {
    Rng enc_rng(mix_seed(seed, encoder_stream));
    nn::ParamFactory<Real> f(group, prefix + ".", enc_rng);
    nn::Frontend<Real> frontend(f.scoped("frontend"), input_dim, enc);
    nn::ConformerStack<Real> stack(f.scoped("encoder"), layers, enc);
    Rng head_rng(mix_seed(seed, head_stream));
    Mlp<Real> head(nn::ParamFactory<Real>(group, prefix + ".head.", head_rng), d,
                   config_.head_hidden1, config_.head_hidden2, out, config_.head_dropout);
    std::optional<Mlp<Real>> recon;
    if (config_.use_reconstruction) {
      Rng recon_rng(mix_seed(seed, recon_stream));
      recon.emplace(nn::ParamFactory<Real>(group, prefix + ".recon.", recon_rng), d,
                    config_.head_hidden1, config_.head_hidden2, input_dim, config_.head_dropout);
    }
    return Branch{std::move(frontend), std::move(stack), std::move(head), std::move(recon)};
  };

  acoustic_.emplace(make_branch(group(GroupId::kThetaA), "acoustic", config_.acoustic_dim,
                                enc.layers_acoustic, kAcousticEncoder, kAcousticHead,
                                kAcousticRecon));
  visual_.emplace(make_branch(group(GroupId::kThetaV), "visual", config_.visual_dim,
                              enc.layers_visual, kVisualEncoder, kVisualHead, kVisualRecon));
  {
    Rng rng(mix_seed(seed, kSharedEncoder));
    shared_.emplace(nn::ParamFactory<Real>(group(GroupId::kThetaS), "shared.encoder.", rng),
                    enc.layers_shared, enc);
  }
  if (config_.fusion == Fusion::kAvHead) {
    Rng rng(mix_seed(seed, kFusionHead));
    fusion_.emplace(nn::ParamFactory<Real>(group(GroupId::kThetaAV), "fusion.", rng), 2 * d,
                    config_.head_hidden1, config_.head_hidden2, out, config_.head_dropout);
  }
}

template <typename Real>
std::size_t VavlModel<Real>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& g : groups_) n += g.num_scalars();
  return n;
}

template <typename Real>
std::set<std::string> VavlModel<Real>::parameter_names(GroupId id) const {
  std::set<std::string> names;
  for (const auto& p : group(id).params()) names.insert(p->name);
  return names;
}

template <typename Real>
ForwardOutput<Real> VavlModel<Real>::forward_unimodal(Modality modality,
                                                      const SequenceInput<Real>& input,
                                                      const nn::ForwardContext& ctx) const {
  const Branch& br = branch(modality);
  require(input.frames->value.cols() == config_.input_dim(modality), ErrorCode::kShapeMismatch,
          data::to_string(modality) + " input width " +
              std::to_string(input.frames->value.cols()) + " does not match model (" +
              std::to_string(config_.input_dim(modality)) + ")");
  const SeqLayout& layout = input.layout;
  Var<Real> x = br.frontend.project(input.frames, layout);
  x = num::add(x, num::constant(num::positional_encoding<Real>(layout, config_.encoder.d_model)));
  const Var<Real> unimodal = br.stack.encode(x, layout, ctx);
  const Var<Real> shared = shared_->encode(unimodal, layout, ctx);
  const Var<Real> combined = config_.use_residual ? num::add(shared, unimodal) : shared;

  ForwardOutput<Real> out;
  out.pooled_shared = num::mean_pool(combined, layout);
  out.pred = br.head(out.pooled_shared, ctx);
  out.pooled_input = num::mean_pool_values(input.frames->value, layout);
  if (br.recon) out.recon = (*br.recon)(out.pooled_shared, ctx);
  return out;
}

template <typename Real>
Var<Real> VavlModel<Real>::forward_audiovisual(const SequenceInput<Real>& audio,
                                               const SequenceInput<Real>& video,
                                               const nn::ForwardContext& ctx,
                                               FusionProbe<Real>* probe) const {
  require(fusion_.has_value(), ErrorCode::kUnavailable,
          "model has no audio-visual prediction layer (average fusion)");
  require(audio.layout.batch == video.layout.batch, ErrorCode::kShapeMismatch,
          "audio and video batch sizes differ");
  const Var<Real> pooled_a = forward_unimodal(Modality::kAcoustic, audio, ctx).pooled_shared;
  const Var<Real> pooled_v = forward_unimodal(Modality::kVisual, video, ctx).pooled_shared;
  const Var<Real> joint = num::concat_cols(pooled_a, pooled_v);
  if (probe) probe->fusion_input = joint->value;
  return (*fusion_)(joint, ctx);
}

template <typename Real>
std::vector<Tensor<Real>> VavlModel<Real>::snapshot() const {
  std::vector<Tensor<Real>> values;
  for (const auto& g : groups_)
    for (const auto& p : g.params()) values.push_back(p->value);
  return values;
}

template <typename Real>
void VavlModel<Real>::restore(const std::vector<Tensor<Real>>& values) {
  std::size_t i = 0;
  for (auto& g : groups_)
    for (auto& p : g.params()) {
      require(i < values.size() && values[i].shape == p->value.shape, ErrorCode::kShapeMismatch,
              "restore: snapshot does not match model layout");
      p->value = values[i++];
    }
  require(i == values.size(), ErrorCode::kShapeMismatch, "restore: snapshot has extra entries");
}

template <typename Real>
num::Checkpoint VavlModel<Real>::to_checkpoint(const json& extra) const {
  json meta = extra;
  meta["model_config"] = to_json(config_);
  meta["fusion_updates"] = fusion_updates_;
  num::Checkpoint ckpt;
  ckpt.metadata_json = meta.dump();
  for (const auto& g : groups_)
    for (const auto& p : g.params())
      ckpt.entries.push_back({std::string(g.name()) + "/" + p->name, p->value.template cast<float>()});
  return ckpt;
}

template <typename Real>
VavlModel<Real> VavlModel<Real>::from_checkpoint(const num::Checkpoint& checkpoint) {
  json meta;
  try {
    meta = json::parse(checkpoint.metadata_json);
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("checkpoint metadata is not JSON: ") + e.what());
  }
  require(meta.contains("model_config"), ErrorCode::kFormat, "checkpoint lacks model_config");
  VavlModel model(model_config_from_json(meta["model_config"]), 0);
  model.fusion_updates_ = meta.value("fusion_updates", std::uint64_t{0});
  std::size_t expected = 0;
  for (auto& g : model.groups_)
    for (auto& p : g.params()) {
      ++expected;
      const std::string key = std::string(g.name()) + "/" + p->name;
      const auto* entry = checkpoint.find(key);
      require(entry != nullptr, ErrorCode::kFormat, "checkpoint is missing " + key);
      require(entry->value.shape == p->value.shape, ErrorCode::kShapeMismatch,
              "checkpoint shape mismatch for " + key);
      p->value = entry->value.template cast<Real>();
    }
  require(expected == checkpoint.entries.size(), ErrorCode::kFormat,
          "checkpoint has parameters the configured model does not");
  return model;
}

template <typename Real>
Tensor<Real> average_fusion(const Tensor<Real>& pred_a, const Tensor<Real>& pred_v,
                            data::Task task) {
  num::require_same_shape(pred_a, pred_v, "average_fusion");
  Tensor<Real> a = pred_a, v = pred_v;
  if (task == data::Task::kClassification) {
    a = num::softmax_rows(pred_a);
    v = num::softmax_rows(pred_v);
  } else {
    require(pred_a.cols() == 3, ErrorCode::kInvalidArgument,
            "average_fusion: regression predictions must have 3 attributes");
  }
  Tensor<Real> out(a.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (a[i] + v[i]) / Real(2);
  return out;
}

int Prediction::argmax() const {
  return static_cast<int>(std::max_element(output.begin(), output.end()) - output.begin());
}

Prediction predict(const data::Sample& sample, const VavlModel<float>& model) {
  const auto ctx = nn::ForwardContext::eval();
  const auto& cfg = model.config();
  Prediction p;
  auto to_vec = [](const Tensor<float>& t) { return std::vector<double>(t.data.begin(), t.data.end()); };
  switch (sample.presence()) {
    case data::Presence::kPaired: {
      const auto a = SequenceInput<float>::from_sequence(*sample.audio);
      const auto v = SequenceInput<float>::from_sequence(*sample.video);
      p.condition = Condition::kAudioVisual;
      if (cfg.fusion == Fusion::kAvHead) {
        p.output = to_vec(model.forward_audiovisual(a, v, ctx)->value);
      } else {
        const auto pa = model.forward_unimodal(Modality::kAcoustic, a, ctx).pred->value;
        const auto pv = model.forward_unimodal(Modality::kVisual, v, ctx).pred->value;
        p.output = to_vec(average_fusion(pa, pv, cfg.task));
        p.probabilities = cfg.task == data::Task::kClassification;
      }
      break;
    }
    case data::Presence::kAudioOnly:
      p.condition = Condition::kAcoustic;
      p.output = to_vec(model
                            .forward_unimodal(Modality::kAcoustic,
                                              SequenceInput<float>::from_sequence(*sample.audio), ctx)
                            .pred->value);
      break;
    case data::Presence::kVideoOnly:
      p.condition = Condition::kVisual;
      p.output = to_vec(model
                            .forward_unimodal(Modality::kVisual,
                                              SequenceInput<float>::from_sequence(*sample.video), ctx)
                            .pred->value);
      break;
  }
  return p;
}

std::vector<double> shared_embedding(const data::FeatureSequence& seq,
                                     const VavlModel<float>& model) {
  const auto out = model.forward_unimodal(seq.modality, SequenceInput<float>::from_sequence(seq),
                                          nn::ForwardContext::eval());
  return {out.pooled_shared->value.data.begin(), out.pooled_shared->value.data.end()};
}

template struct SequenceInput<float>;
template struct SequenceInput<double>;
template class Mlp<float>;
template class Mlp<double>;
template class VavlModel<float>;
template class VavlModel<double>;
template Tensor<float> average_fusion(const Tensor<float>&, const Tensor<float>&, data::Task);
template Tensor<double> average_fusion(const Tensor<double>&, const Tensor<double>&, data::Task);

}  // namespace vavl::model

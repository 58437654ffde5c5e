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
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "vavl/tensor.hpp"

namespace vavl::num {

template <typename Real>
struct Node;

// Handle to a value in the dynamically recorded computation graph.
template <typename Real>
using Var = std::shared_ptr<Node<Real>>;

template <typename Real>
struct Node {
  Tensor<Real> value;
  Tensor<Real> grad;  // empty until backward reaches this node
  bool requires_grad = false;
  std::string name;  // non-empty only for parameters
  std::vector<Var<Real>> parents;
  std::function<void(Node&)> backward_fn;

  // Gradient buffer, zero-initialized on first access.
  Tensor<Real>& grad_buffer() {
    if (grad.shape != value.shape) grad = Tensor<Real>(value.shape);
    return grad;
  }
};

template <typename Real>
using GradMap = std::map<std::string, Tensor<Real>>;

// Wraps a tensor that never receives gradients.
template <typename Real>
Var<Real> constant(Tensor<Real> value) {
  auto node = std::make_shared<Node<Real>>();
  node->value = std::move(value);
  return node;
}

// Leaf that accumulates gradients; `name` keys it in the GradMap.
template <typename Real>
Var<Real> leaf(Tensor<Real> value, std::string name, bool requires_grad = true) {
  auto node = std::make_shared<Node<Real>>();
  node->value = std::move(value);
  node->name = std::move(name);
  node->requires_grad = requires_grad;
  return node;
}

// Records an operation. When no parent requires a gradient the result is a
// plain constant and nothing is retained.
template <typename Real>
Var<Real> make_op(Tensor<Real> value, std::vector<Var<Real>> parents,
                  std::function<void(Node<Real>&)> backward_fn) {
  auto node = std::make_shared<Node<Real>>();
  node->value = std::move(value);
  for (const auto& p : parents) {
    if (p->requires_grad) {
      node->requires_grad = true;
      break;
    }
  }
  if (node->requires_grad) {
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return node;
}

// Reverse-mode sweep from a scalar. Returns gradients of every named leaf
// that requires a gradient and took part in producing `loss`. Leaf gradient
// buffers are cleared afterwards, so repeated passes do not accumulate.
// Throws kDivergence on a non-finite loss.
template <typename Real>
GradMap<Real> backward(const Var<Real>& loss);

enum class GroupId { kThetaA, kThetaV, kThetaS, kThetaAV };

inline constexpr GroupId kAllGroups[] = {GroupId::kThetaA, GroupId::kThetaV, GroupId::kThetaS,
                                         GroupId::kThetaAV};

std::string_view group_name(GroupId id);
GroupId group_from_name(std::string_view name);

// A named, ordered set of parameters updated together. Freezing a group
// turns its leaves into non-differentiable inputs for subsequent forwards.
template <typename Real>
class ParameterGroup {
 public:
  explicit ParameterGroup(GroupId id) : id_(id) {}

  GroupId id() const { return id_; }
  std::string_view name() const { return group_name(id_); }

  Var<Real> add(std::string param_name, Tensor<Real> init) {
    for (const auto& p : params_)
      require(p->name != param_name, ErrorCode::kInvalidArgument,
              "duplicate parameter name: " + param_name);
    params_.push_back(leaf(std::move(init), std::move(param_name), trainable_));
    return params_.back();
  }

  const std::vector<Var<Real>>& params() const { return params_; }

  Var<Real> find(std::string_view param_name) const {
    for (const auto& p : params_)
      if (p->name == param_name) return p;
    return nullptr;
  }

  bool trainable() const { return trainable_; }
  void set_trainable(bool on) {
    trainable_ = on;
    for (auto& p : params_) p->requires_grad = on;
  }

  std::size_t num_scalars() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

  bool empty() const { return params_.empty(); }

 private:
  GroupId id_;
  bool trainable_ = true;
  std::vector<Var<Real>> params_;
};

// Freezes groups for the lifetime of the guard, then restores each group's
// previous state.
template <typename Real>
class FreezeGuard {
 public:
  explicit FreezeGuard(std::vector<ParameterGroup<Real>*> groups) : groups_(std::move(groups)) {
    for (auto* g : groups_) {
      previous_.push_back(g->trainable());
      g->set_trainable(false);
    }
  }
  ~FreezeGuard() {
    for (std::size_t i = 0; i < groups_.size(); ++i) groups_[i]->set_trainable(previous_[i]);
  }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  std::vector<ParameterGroup<Real>*> groups_;
  std::vector<bool> previous_;
};

// FNV-1a over the raw bytes of every parameter, in order.
template <typename Real>
std::uint64_t checksum(const ParameterGroup<Real>& group);

}  // namespace vavl::num

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

#include "vavl/autograd.hpp"

#include <cstring>
#include <unordered_set>
#include <utility>

namespace vavl::num {

template <typename Real>
GradMap<Real> backward(const Var<Real>& loss) {
  require(loss != nullptr && loss->value.size() == 1, ErrorCode::kInvalidArgument,
          "backward expects a scalar loss");
  require(std::isfinite(static_cast<double>(loss->value[0])), ErrorCode::kDivergence,
          "non-finite loss");
  GradMap<Real> grads;
  if (!loss->requires_grad) return grads;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node<Real>*> order;
  std::unordered_set<Node<Real>*> visited;
  std::vector<std::pair<Node<Real>*, std::size_t>> stack{{loss.get(), 0}};
  visited.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<Real>* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.push_back({parent, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss->grad_buffer()[0] = Real(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<Real>* node = *it;
    if (node->backward_fn && node->grad.shape == node->value.shape) node->backward_fn(*node);
  }
  for (Node<Real>* node : order) {
    if (!node->name.empty() && node->parents.empty() && node->grad.shape == node->value.shape)
      grads.emplace(node->name, std::move(node->grad));
    node->grad = Tensor<Real>();
  }
  return grads;
}

std::string_view group_name(GroupId id) {
  switch (id) {
    case GroupId::kThetaA: return "theta_a";
    case GroupId::kThetaV: return "theta_v";
    case GroupId::kThetaS: return "theta_s";
    case GroupId::kThetaAV: return "theta_av";
  }
  return "unknown";
}

GroupId group_from_name(std::string_view name) {
  for (GroupId id : kAllGroups)
    if (group_name(id) == name) return id;
  fail(ErrorCode::kFormat, "unknown parameter group: " + std::string(name));
}

template <typename Real>
std::uint64_t checksum(const ParameterGroup<Real>& group) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& p : group.params()) {
    mix(p->name.data(), p->name.size());
    mix(p->value.data.data(), p->value.data.size() * sizeof(Real));
  }
  return h;
}

template GradMap<float> backward(const Var<float>&);
template GradMap<double> backward(const Var<double>&);
template std::uint64_t checksum(const ParameterGroup<float>&);
template std::uint64_t checksum(const ParameterGroup<double>&);

}  // namespace vavl::num

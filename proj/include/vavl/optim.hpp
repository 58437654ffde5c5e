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
#include <map>
#include <string>

#include "vavl/autograd.hpp"

namespace vavl::num {

struct AdamConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Real>
struct AdamState {
  struct Moments {
    Tensor<Real> m;
    Tensor<Real> v;
  };
  std::map<std::string, Moments> moments;
  std::uint64_t step = 0;
};

// One bias-corrected ADAM step over `group`. Parameters without an entry in
// `grads` did not take part in the forward pass and are left untouched; the
// step counter still advances once per call. Frozen groups are rejected.
template <typename Real>
void adam_update(ParameterGroup<Real>& group, const GradMap<Real>& grads, AdamState<Real>& state,
                 const AdamConfig& config);

// Owns the ADAM state of exactly one parameter group.
template <typename Real>
class Adam {
 public:
  Adam(ParameterGroup<Real>& group, AdamConfig config) : group_(&group), config_(config) {}

  void step(const GradMap<Real>& grads) { adam_update(*group_, grads, state_, config_); }

  std::uint64_t steps() const { return state_.step; }
  const AdamState<Real>& state() const { return state_; }
  const AdamConfig& config() const { return config_; }

 private:
  ParameterGroup<Real>* group_;
  AdamConfig config_;
  AdamState<Real> state_;
};

}  // namespace vavl::num

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

#include "vavl/optim.hpp"

#include <cmath>

namespace vavl::num {

template <typename Real>
void adam_update(ParameterGroup<Real>& group, const GradMap<Real>& grads, AdamState<Real>& state,
                 const AdamConfig& config) {
  require(group.trainable(), ErrorCode::kInvalidArgument,
          "adam_update on frozen group " + std::string(group.name()));
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);
  const Real b1 = static_cast<Real>(config.beta1);
  const Real b2 = static_cast<Real>(config.beta2);
  for (auto& param : group.params()) {
    auto it = grads.find(param->name);
    if (it == grads.end()) continue;
    const Tensor<Real>& g = it->second;
    require_same_shape(param->value, g, ("adam_update: " + param->name).c_str());
    auto& mom = state.moments[param->name];
    if (mom.m.shape != g.shape) {
      mom.m = Tensor<Real>(g.shape);
      mom.v = Tensor<Real>(g.shape);
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      mom.m[i] = b1 * mom.m[i] + (Real(1) - b1) * g[i];
      mom.v[i] = b2 * mom.v[i] + (Real(1) - b2) * g[i] * g[i];
      const double m_hat = static_cast<double>(mom.m[i]) / bias1;
      const double v_hat = static_cast<double>(mom.v[i]) / bias2;
      param->value[i] -= static_cast<Real>(config.lr * m_hat / (std::sqrt(v_hat) + config.eps));
    }
  }
}

template void adam_update(ParameterGroup<float>&, const GradMap<float>&, AdamState<float>&,
                          const AdamConfig&);
template void adam_update(ParameterGroup<double>&, const GradMap<double>&, AdamState<double>&,
                          const AdamConfig&);

}  // namespace vavl::num

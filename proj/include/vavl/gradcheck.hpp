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

#include <functional>
#include <span>
#include <vector>

#include "vavl/autograd.hpp"

namespace vavl::num {

struct GradCheckResult {
  double max_rel_error = 0.0;  // max |analytic - numeric| / max(1, |numeric|)
  std::size_t coordinates = 0;
};

// Central differences against backward() for every coordinate of `params`,
// which must be named leaves that `f` reads. Parameter values are restored
// on return. Throws kDivergence if any evaluation is non-finite.
GradCheckResult finite_diff_check(std::span<const Var<double>> params,
                                  const std::function<Var<double>()>& f, double h = 1e-5);

// Convenience form: the point is given as tensors, wrapped into leaves
// "p0", "p1", ... and handed to `f`.
GradCheckResult finite_diff_check(
    const std::function<Var<double>(const std::vector<Var<double>>&)>& f,
    std::vector<Tensor<double>> point, double h = 1e-5);

}  // namespace vavl::num

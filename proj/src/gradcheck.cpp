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

#include "vavl/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace vavl::num {
namespace {

double evaluate(const std::function<Var<double>()>& f) {
  const Var<double> out = f();
  require(out && out->value.size() == 1, ErrorCode::kInvalidArgument,
          "finite_diff_check: function must return a scalar");
  const double v = out->value[0];
  require(std::isfinite(v), ErrorCode::kDivergence, "finite_diff_check: non-finite evaluation");
  return v;
}

}  // namespace

GradCheckResult finite_diff_check(std::span<const Var<double>> params,
                                  const std::function<Var<double>()>& f, double h) {
  const GradMap<double> analytic = backward(f());
  GradCheckResult result;
  for (const auto& param : params) {
    auto it = analytic.find(param->name);
    for (std::size_t i = 0; i < param->value.size(); ++i) {
      const double saved = param->value[i];
      param->value[i] = saved + h;
      const double plus = evaluate(f);
      param->value[i] = saved - h;
      const double minus = evaluate(f);
      param->value[i] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = it == analytic.end() ? 0.0 : it->second[i];
      result.max_rel_error =
          std::max(result.max_rel_error, std::abs(a - numeric) / std::max(1.0, std::abs(numeric)));
      ++result.coordinates;
    }
  }
  return result;
}

GradCheckResult finite_diff_check(
    const std::function<Var<double>(const std::vector<Var<double>>&)>& f,
    std::vector<Tensor<double>> point, double h) {
  std::vector<Var<double>> leaves;
  for (std::size_t i = 0; i < point.size(); ++i)
    leaves.push_back(leaf(std::move(point[i]), "p" + std::to_string(i)));
  return finite_diff_check(leaves, [&] { return f(leaves); }, h);
}

}  // namespace vavl::num

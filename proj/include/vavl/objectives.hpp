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

#include <span>

#include "vavl/autograd.hpp"

namespace vavl::loss {

using num::Tensor;
using num::Var;

/// Concordance correlation coefficient with population (1/N) moments:
///   2 cov(x, y) / (var x + var y + (mean x - mean y)^2).
/// Two constant, equal inputs give 1 (continuity limit). Requires N >= 2.
double ccc(std::span<const double> x, std::span<const double> y);

/// Mean squared coordinate difference.
double recon_mse(std::span<const double> x_pool, std::span<const double> rec);

struct LossValue {
  double total = 0.0;
  double pred_term = 0.0;
  double recon_term = 0.0;
  double alpha = 0.0;
};

/// total = pred + alpha * recon; the reconstruction term is reported as 0
/// when reconstruction is disabled.
LossValue total_loss(double pred_loss, double recon_loss, double alpha,
                     bool use_reconstruction = true);

/// Mean over rows of -log softmax(logits)[label], max-subtracted.
template <typename Real>
Var<Real> cross_entropy(const Var<Real>& logits, std::span<const int> labels);

/// Mean over columns of (1 - ccc(pred[:, k], target[:, k])) using batch
/// statistics. Requires N >= 2 rows.
template <typename Real>
Var<Real> ccc_loss(const Var<Real>& preds, const Tensor<Real>& targets);

/// Mean over all entries of (rec - target)^2.
template <typename Real>
Var<Real> mse(const Var<Real>& rec, const Tensor<Real>& target);

/// Graph form of total_loss. `recon` may be null.
template <typename Real>
Var<Real> combine(const Var<Real>& pred_loss, const Var<Real>& recon, double alpha);

}  // namespace vavl::loss

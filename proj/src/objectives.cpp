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

#include "vavl/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "vavl/ops.hpp"

namespace vavl::loss {
namespace {

struct Moments {
  double mean_x = 0, mean_y = 0, var_x = 0, var_y = 0, cov = 0;
};

template <typename GetX, typename GetY>
Moments moments(std::size_t n, GetX x, GetY y) {
  Moments m;
  for (std::size_t i = 0; i < n; ++i) {
    m.mean_x += x(i);
    m.mean_y += y(i);
  }
  m.mean_x /= double(n);
  m.mean_y /= double(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x(i) - m.mean_x, dy = y(i) - m.mean_y;
    m.var_x += dx * dx;
    m.var_y += dy * dy;
    m.cov += dx * dy;
  }
  m.var_x /= double(n);
  m.var_y /= double(n);
  m.cov /= double(n);
  return m;
}

double ccc_from(const Moments& m) {
  const double shift = m.mean_x - m.mean_y;
  const double den = m.var_x + m.var_y + shift * shift;
  if (den == 0.0) return 1.0;
  return 2.0 * m.cov / den;
}

}  // namespace

double ccc(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorCode::kShapeMismatch, "ccc: length mismatch");
  require(x.size() >= 2, ErrorCode::kInvalidArgument, "ccc: needs at least 2 points");
  return ccc_from(moments(x.size(), [&](std::size_t i) { return x[i]; },
                          [&](std::size_t i) { return y[i]; }));
}

double recon_mse(std::span<const double> x_pool, std::span<const double> rec) {
  require(x_pool.size() == rec.size() && !rec.empty(), ErrorCode::kShapeMismatch,
          "recon_mse: dimension mismatch");
  double acc = 0;
  for (std::size_t i = 0; i < rec.size(); ++i) acc += (rec[i] - x_pool[i]) * (rec[i] - x_pool[i]);
  return acc / double(rec.size());
}

LossValue total_loss(double pred_loss, double recon_loss, double alpha, bool use_reconstruction) {
  require(alpha >= 0.0, ErrorCode::kInvalidArgument, "alpha must be non-negative");
  LossValue v;
  v.pred_term = pred_loss;
  v.recon_term = use_reconstruction ? recon_loss : 0.0;
  v.alpha = alpha;
  v.total = v.pred_term + alpha * v.recon_term;
  return v;
}

template <typename Real>
Var<Real> cross_entropy(const Var<Real>& logits, std::span<const int> labels) {
  const Tensor<Real>& L = logits->value;
  require(L.shape.size() == 2 && L.shape[0] == labels.size() && L.shape[1] >= 2,
          ErrorCode::kShapeMismatch, "cross_entropy: logits must be [N x M>=2] with N labels");
  const std::size_t n = L.shape[0], m = L.shape[1];
  for (int label : labels)
    require(label >= 0 && static_cast<std::size_t>(label) < m, ErrorCode::kInvalidArgument,
            "cross_entropy: label out of range");
  Tensor<Real> probs = num::softmax_rows(L);
  Real total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Real* r = &L.data[i * m];
    const Real mx = *std::max_element(r, r + m);
    Real z = 0;
    for (std::size_t j = 0; j < m; ++j) z += std::exp(r[j] - mx);
    total += std::log(z) + mx - r[labels[i]];
  }
  std::vector<int> owned(labels.begin(), labels.end());
  return num::make_op<Real>(
      Tensor<Real>({1}, total / Real(n)), {logits},
      [n, m, probs = std::move(probs), owned = std::move(owned)](num::Node<Real>& self) {
        auto& g = self.parents[0]->grad_buffer();
        const Real s = self.grad[0] / Real(n);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < m; ++j)
            g.data[i * m + j] +=
                s * (probs.data[i * m + j] - (static_cast<int>(j) == owned[i] ? Real(1) : Real(0)));
      });
}

template <typename Real>
Var<Real> ccc_loss(const Var<Real>& preds, const Tensor<Real>& targets) {
  num::require_same_shape(preds->value, targets, "ccc_loss");
  const Tensor<Real>& P = preds->value;
  require(P.shape.size() == 2, ErrorCode::kShapeMismatch, "ccc_loss: expects [N x K]");
  const std::size_t n = P.shape[0], k = P.shape[1];
  require(n >= 2, ErrorCode::kInvalidArgument, "ccc_loss: batch statistics need N >= 2");
  std::vector<Moments> stats(k);
  double total = 0;
  for (std::size_t c = 0; c < k; ++c) {
    stats[c] = moments(n, [&](std::size_t i) { return double(P.data[i * k + c]); },
                       [&](std::size_t i) { return double(targets.data[i * k + c]); });
    total += 1.0 - ccc_from(stats[c]);
  }
  return num::make_op<Real>(
      Tensor<Real>({1}, static_cast<Real>(total / double(k))), {preds},
      [n, k, stats = std::move(stats), targets](num::Node<Real>& self) {
        auto& p = self.parents[0];
        auto& dp = p->grad_buffer();
        const double upstream = double(self.grad[0]) / double(k);
        for (std::size_t c = 0; c < k; ++c) {
          const Moments& m = stats[c];
          const double shift = m.mean_x - m.mean_y;
          const double den = m.var_x + m.var_y + shift * shift;
          if (den == 0.0) continue;
          const double num = 2.0 * m.cov;
          for (std::size_t i = 0; i < n; ++i) {
            const double x = p->value.data[i * k + c];
            const double y = targets.data[i * k + c];
            const double dnum = 2.0 * (y - m.mean_y) / double(n);
            const double dden = 2.0 * (x - m.mean_x) / double(n) + 2.0 * shift / double(n);
            const double dccc = (dnum * den - num * dden) / (den * den);
            dp.data[i * k + c] += static_cast<Real>(-upstream * dccc);
          }
        }
      });
}

template <typename Real>
Var<Real> mse(const Var<Real>& rec, const Tensor<Real>& target) {
  num::require_same_shape(rec->value, target, "mse");
  const std::size_t n = target.size();
  require(n > 0, ErrorCode::kShapeMismatch, "mse: empty input");
  Real acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Real d = rec->value[i] - target[i];
    acc += d * d;
  }
  return num::make_op<Real>(Tensor<Real>({1}, acc / Real(n)), {rec},
                            [n, target](num::Node<Real>& self) {
                              auto& p = self.parents[0];
                              auto& g = p->grad_buffer();
                              const Real s = Real(2) * self.grad[0] / Real(n);
                              for (std::size_t i = 0; i < n; ++i)
                                g[i] += s * (p->value[i] - target[i]);
                            });
}

template <typename Real>
Var<Real> combine(const Var<Real>& pred_loss, const Var<Real>& recon, double alpha) {
  require(alpha >= 0.0, ErrorCode::kInvalidArgument, "alpha must be non-negative");
  if (!recon) return pred_loss;
  return num::add(pred_loss, num::scale(recon, static_cast<Real>(alpha)));
}

#define VAVL_INSTANTIATE_LOSSES(Real)                                              \
  template Var<Real> cross_entropy(const Var<Real>&, std::span<const int>);        \
  template Var<Real> ccc_loss(const Var<Real>&, const Tensor<Real>&);              \
  template Var<Real> mse(const Var<Real>&, const Tensor<Real>&);                   \
  template Var<Real> combine(const Var<Real>&, const Var<Real>&, double);

VAVL_INSTANTIATE_LOSSES(float)
VAVL_INSTANTIATE_LOSSES(double)

#undef VAVL_INSTANTIATE_LOSSES

}  // namespace vavl::loss

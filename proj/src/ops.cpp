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

#include "vavl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vavl::num {
namespace {

template <typename Real>
Real sigmoid(Real x) {
  if (x >= Real(0)) return Real(1) / (Real(1) + std::exp(-x));
  const Real e = std::exp(x);
  return e / (Real(1) + e);
}

template <typename Real>
void require_layout(const Tensor<Real>& x, const SeqLayout& layout, const char* what) {
  require(x.shape.size() == 2 && x.rows() == layout.rows() &&
              layout.lengths.size() == layout.batch,
          ErrorCode::kShapeMismatch, std::string(what) + ": tensor does not match layout");
  for (std::size_t len : layout.lengths)
    require(len <= layout.max_len, ErrorCode::kShapeMismatch,
            std::string(what) + ": length exceeds max_len");
}

}  // namespace

template <typename Real>
Var<Real> add(const Var<Real>& a, const Var<Real>& b) {
  require_same_shape(a->value, b->value, "add");
  Tensor<Real> out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b->value[i];
  return make_op<Real>(std::move(out), {a, b}, [](Node<Real>& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename Real>
Var<Real> mul(const Var<Real>& a, const Var<Real>& b) {
  require_same_shape(a->value, b->value, "mul");
  Tensor<Real> out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b->value[i];
  return make_op<Real>(std::move(out), {a, b}, [](Node<Real>& self) {
    auto& a = self.parents[0];
    auto& b = self.parents[1];
    if (a->requires_grad) {
      auto& g = a->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * b->value[i];
    }
    if (b->requires_grad) {
      auto& g = b->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * a->value[i];
    }
  });
}

template <typename Real>
Var<Real> scale(const Var<Real>& a, Real factor) {
  Tensor<Real> out = a->value;
  for (auto& v : out.data) v *= factor;
  return make_op<Real>(std::move(out), {a}, [factor](Node<Real>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

template <typename Real>
Var<Real> sum(const Var<Real>& a) {
  Real total = 0;
  for (Real v : a->value.data) total += v;
  return make_op<Real>(Tensor<Real>({1}, total), {a}, [](Node<Real>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (auto& v : g.data) v += self.grad[0];
  });
}

template <typename Real>
Var<Real> sum_squares(const Var<Real>& a) {
  Real total = 0;
  for (Real v : a->value.data) total += v * v;
  return make_op<Real>(Tensor<Real>({1}, total), {a}, [](Node<Real>& self) {
    auto& p = self.parents[0];
    auto& g = p->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += Real(2) * p->value[i] * self.grad[0];
  });
}

template <typename Real>
Var<Real> linear(const Var<Real>& x, const Var<Real>& weight, const Var<Real>& bias) {
  const Tensor<Real>& X = x->value;
  const Tensor<Real>& W = weight->value;
  require(X.shape.size() == 2 && W.shape.size() == 2 && X.shape[1] == W.shape[0],
          ErrorCode::kShapeMismatch,
          "linear: input " + shape_str(X.shape) + " vs weight " + shape_str(W.shape));
  const std::size_t n = X.shape[0], in = W.shape[0], out = W.shape[1];
  Tensor<Real> Y({n, out});
  if (bias) {
    require(bias->value.size() == out, ErrorCode::kShapeMismatch, "linear: bias size");
    for (std::size_t i = 0; i < n; ++i)
      std::copy(bias->value.data.begin(), bias->value.data.end(), Y.data.begin() + i * out);
  }
  for (std::size_t i = 0; i < n; ++i) {
    Real* y = &Y.data[i * out];
    for (std::size_t k = 0; k < in; ++k) {
      const Real xv = X.data[i * in + k];
      if (xv == Real(0)) continue;
      const Real* w = &W.data[k * out];
      for (std::size_t j = 0; j < out; ++j) y[j] += xv * w[j];
    }
  }
  std::vector<Var<Real>> parents{x, weight};
  if (bias) parents.push_back(bias);
  return make_op<Real>(std::move(Y), std::move(parents), [n, in, out](Node<Real>& self) {
    auto& x = self.parents[0];
    auto& w = self.parents[1];
    const Real* dy = self.grad.data.data();
    if (x->requires_grad) {
      auto& dx = x->grad_buffer();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < in; ++k) {
          const Real* wr = &w->value.data[k * out];
          Real acc = 0;
          for (std::size_t j = 0; j < out; ++j) acc += dy[i * out + j] * wr[j];
          dx.data[i * in + k] += acc;
        }
    }
    if (w->requires_grad) {
      auto& dw = w->grad_buffer();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < in; ++k) {
          const Real xv = x->value.data[i * in + k];
          if (xv == Real(0)) continue;
          Real* dwr = &dw.data[k * out];
          for (std::size_t j = 0; j < out; ++j) dwr[j] += xv * dy[i * out + j];
        }
    }
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      auto& db = self.parents[2]->grad_buffer();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < out; ++j) db.data[j] += dy[i * out + j];
    }
  });
}

template <typename Real>
Var<Real> relu(const Var<Real>& x) {
  Tensor<Real> out = x->value;
  for (auto& v : out.data) v = std::max(v, Real(0));
  return make_op<Real>(std::move(out), {x}, [](Node<Real>& self) {
    auto& p = self.parents[0];
    auto& g = p->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (p->value[i] > Real(0)) g[i] += self.grad[i];
  });
}

template <typename Real>
Var<Real> silu(const Var<Real>& x) {
  Tensor<Real> out = x->value;
  for (auto& v : out.data) v = v * sigmoid(v);
  return make_op<Real>(std::move(out), {x}, [](Node<Real>& self) {
    auto& p = self.parents[0];
    auto& g = p->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Real z = p->value[i];
      const Real s = sigmoid(z);
      g[i] += self.grad[i] * (s + z * s * (Real(1) - s));
    }
  });
}

template <typename Real>
Var<Real> glu(const Var<Real>& x) {
  const Tensor<Real>& X = x->value;
  require(X.shape.size() == 2 && X.shape[1] % 2 == 0, ErrorCode::kShapeMismatch,
          "glu: last dimension must be even");
  const std::size_t n = X.shape[0], c = X.shape[1] / 2;
  Tensor<Real> Y({n, c});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j)
      Y.data[i * c + j] = X.data[i * 2 * c + j] * sigmoid(X.data[i * 2 * c + c + j]);
  return make_op<Real>(std::move(Y), {x}, [n, c](Node<Real>& self) {
    auto& p = self.parents[0];
    auto& g = p->grad_buffer();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        const Real a = p->value.data[i * 2 * c + j];
        const Real s = sigmoid(p->value.data[i * 2 * c + c + j]);
        const Real dy = self.grad.data[i * c + j];
        g.data[i * 2 * c + j] += dy * s;
        g.data[i * 2 * c + c + j] += dy * a * s * (Real(1) - s);
      }
  });
}

template <typename Real>
Var<Real> layer_norm(const Var<Real>& x, const Var<Real>& gamma, const Var<Real>& beta,
                     Real eps) {
  const Tensor<Real>& X = x->value;
  require(X.shape.size() == 2 && gamma->value.size() == X.shape[1] &&
              beta->value.size() == X.shape[1],
          ErrorCode::kShapeMismatch, "layer_norm: shape mismatch");
  const std::size_t n = X.shape[0], d = X.shape[1];
  Tensor<Real> Y({n, d});
  Tensor<Real> xhat({n, d});
  std::vector<Real> inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Real* xr = &X.data[i * d];
    Real mean = 0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= Real(d);
    Real var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= Real(d);
    inv_std[i] = Real(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat.data[i * d + j] = (xr[j] - mean) * inv_std[i];
      Y.data[i * d + j] = gamma->value[j] * xhat.data[i * d + j] + beta->value[j];
    }
  }
  return make_op<Real>(
      std::move(Y), {x, gamma, beta},
      [n, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<Real>& self) {
        auto& x = self.parents[0];
        auto& gamma = self.parents[1];
        auto& beta = self.parents[2];
        const Real* dy = self.grad.data.data();
        if (gamma->requires_grad) {
          auto& dg = gamma->grad_buffer();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) dg.data[j] += dy[i * d + j] * xhat.data[i * d + j];
        }
        if (beta->requires_grad) {
          auto& db = beta->grad_buffer();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) db.data[j] += dy[i * d + j];
        }
        if (x->requires_grad) {
          auto& dx = x->grad_buffer();
          for (std::size_t i = 0; i < n; ++i) {
            Real mean_g = 0, mean_gx = 0;
            for (std::size_t j = 0; j < d; ++j) {
              const Real gj = dy[i * d + j] * gamma->value[j];
              mean_g += gj;
              mean_gx += gj * xhat.data[i * d + j];
            }
            mean_g /= Real(d);
            mean_gx /= Real(d);
            for (std::size_t j = 0; j < d; ++j) {
              const Real gj = dy[i * d + j] * gamma->value[j];
              dx.data[i * d + j] += inv_std[i] * (gj - mean_g - xhat.data[i * d + j] * mean_gx);
            }
          }
        }
      });
}

template <typename Real>
Var<Real> dropout(const Var<Real>& x, Real p, Rng* rng) {
  if (rng == nullptr || p <= Real(0)) return x;
  require(p < Real(1), ErrorCode::kInvalidArgument, "dropout probability must be < 1");
  const Real keep_scale = Real(1) / (Real(1) - p);
  std::vector<Real> mask(x->value.size());
  for (auto& m : mask) m = rng->uniform() >= static_cast<double>(p) ? keep_scale : Real(0);
  Tensor<Real> out = x->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return make_op<Real>(std::move(out), {x}, [mask = std::move(mask)](Node<Real>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
  });
}

template <typename Real>
Var<Real> concat_cols(const Var<Real>& a, const Var<Real>& b) {
  const Tensor<Real>& A = a->value;
  const Tensor<Real>& B = b->value;
  require(A.shape.size() == 2 && B.shape.size() == 2 && A.shape[0] == B.shape[0],
          ErrorCode::kShapeMismatch, "concat_cols: row counts differ");
  const std::size_t n = A.shape[0], p = A.shape[1], q = B.shape[1];
  Tensor<Real> Y({n, p + q});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(&A.data[i * p], p, &Y.data[i * (p + q)]);
    std::copy_n(&B.data[i * q], q, &Y.data[i * (p + q) + p]);
  }
  return make_op<Real>(std::move(Y), {a, b}, [n, p, q](Node<Real>& self) {
    auto& a = self.parents[0];
    auto& b = self.parents[1];
    if (a->requires_grad) {
      auto& g = a->grad_buffer();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) g.data[i * p + j] += self.grad.data[i * (p + q) + j];
    }
    if (b->requires_grad) {
      auto& g = b->grad_buffer();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < q; ++j)
          g.data[i * q + j] += self.grad.data[i * (p + q) + p + j];
    }
  });
}

template <typename Real>
Var<Real> mask_rows(const Var<Real>& x, const SeqLayout& layout) {
  require_layout(x->value, layout, "mask_rows");
  const std::size_t d = x->value.cols();
  Tensor<Real> out = x->value;
  for (std::size_t b = 0; b < layout.batch; ++b)
    for (std::size_t t = layout.lengths[b]; t < layout.max_len; ++t)
      std::fill_n(&out.data[(b * layout.max_len + t) * d], d, Real(0));
  return make_op<Real>(std::move(out), {x}, [layout, d](Node<Real>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t b = 0; b < layout.batch; ++b)
      for (std::size_t t = 0; t < layout.lengths[b]; ++t) {
        const std::size_t row = (b * layout.max_len + t) * d;
        for (std::size_t j = 0; j < d; ++j) g.data[row + j] += self.grad.data[row + j];
      }
  });
}

template <typename Real>
Var<Real> conv1d(const Var<Real>& x, const Var<Real>& weight, const Var<Real>& bias,
                 const SeqLayout& layout) {
  const Tensor<Real>& X = x->value;
  const Tensor<Real>& W = weight->value;
  require_layout(X, layout, "conv1d");
  require(W.shape.size() == 3 && W.shape[1] == X.cols() && W.shape[0] % 2 == 1,
          ErrorCode::kShapeMismatch, "conv1d: weight must be [odd K x in x out]");
  const std::size_t kernel = W.shape[0], in = W.shape[1], out = W.shape[2];
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(kernel / 2);
  const std::size_t T = layout.max_len;
  require(!bias || bias->value.size() == out, ErrorCode::kShapeMismatch, "conv1d: bias size");
  Tensor<Real> Y({layout.rows(), out});
  for (std::size_t b = 0; b < layout.batch; ++b) {
    const auto len = static_cast<std::ptrdiff_t>(layout.lengths[b]);
    for (std::ptrdiff_t t = 0; t < len; ++t) {
      Real* y = &Y.data[(b * T + t) * out];
      if (bias) std::copy(bias->value.data.begin(), bias->value.data.end(), y);
      for (std::size_t k = 0; k < kernel; ++k) {
        const std::ptrdiff_t s = t + static_cast<std::ptrdiff_t>(k) - half;
        if (s < 0 || s >= len) continue;
        const Real* xr = &X.data[(b * T + s) * in];
        for (std::size_t i = 0; i < in; ++i) {
          const Real xv = xr[i];
          if (xv == Real(0)) continue;
          const Real* w = &W.data[(k * in + i) * out];
          for (std::size_t o = 0; o < out; ++o) y[o] += xv * w[o];
        }
      }
    }
  }
  std::vector<Var<Real>> parents{x, weight};
  if (bias) parents.push_back(bias);
  return make_op<Real>(
      std::move(Y), std::move(parents), [layout, kernel, in, out, half](Node<Real>& self) {
        auto& x = self.parents[0];
        auto& w = self.parents[1];
        const std::size_t T = layout.max_len;
        const Real* dy = self.grad.data.data();
        Tensor<Real>* dx = x->requires_grad ? &x->grad_buffer() : nullptr;
        Tensor<Real>* dw = w->requires_grad ? &w->grad_buffer() : nullptr;
        Tensor<Real>* db = (self.parents.size() > 2 && self.parents[2]->requires_grad)
                               ? &self.parents[2]->grad_buffer()
                               : nullptr;
        for (std::size_t b = 0; b < layout.batch; ++b) {
          const auto len = static_cast<std::ptrdiff_t>(layout.lengths[b]);
          for (std::ptrdiff_t t = 0; t < len; ++t) {
            const Real* g = &dy[(b * T + t) * out];
            if (db)
              for (std::size_t o = 0; o < out; ++o) db->data[o] += g[o];
            for (std::size_t k = 0; k < kernel; ++k) {
              const std::ptrdiff_t s = t + static_cast<std::ptrdiff_t>(k) - half;
              if (s < 0 || s >= len) continue;
              for (std::size_t i = 0; i < in; ++i) {
                const Real* wr = &w->value.data[(k * in + i) * out];
                if (dx) {
                  Real acc = 0;
                  for (std::size_t o = 0; o < out; ++o) acc += g[o] * wr[o];
                  dx->data[(b * T + s) * in + i] += acc;
                }
                if (dw) {
                  const Real xv = x->value.data[(b * T + s) * in + i];
                  Real* dwr = &dw->data[(k * in + i) * out];
                  for (std::size_t o = 0; o < out; ++o) dwr[o] += xv * g[o];
                }
              }
            }
          }
        }
      });
}

template <typename Real>
Var<Real> depthwise_conv1d(const Var<Real>& x, const Var<Real>& weight, const Var<Real>& bias,
                           const SeqLayout& layout) {
  const Tensor<Real>& X = x->value;
  const Tensor<Real>& W = weight->value;
  require_layout(X, layout, "depthwise_conv1d");
  const std::size_t c = X.cols();
  require(W.shape.size() == 2 && W.shape[1] == c && W.shape[0] % 2 == 1,
          ErrorCode::kShapeMismatch, "depthwise_conv1d: weight must be [odd K x C]");
  require(!bias || bias->value.size() == c, ErrorCode::kShapeMismatch,
          "depthwise_conv1d: bias size");
  const std::size_t kernel = W.shape[0];
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(kernel / 2);
  const std::size_t T = layout.max_len;
  Tensor<Real> Y({layout.rows(), c});
  for (std::size_t b = 0; b < layout.batch; ++b) {
    const auto len = static_cast<std::ptrdiff_t>(layout.lengths[b]);
    for (std::ptrdiff_t t = 0; t < len; ++t) {
      Real* y = &Y.data[(b * T + t) * c];
      if (bias) std::copy(bias->value.data.begin(), bias->value.data.end(), y);
      for (std::size_t k = 0; k < kernel; ++k) {
        const std::ptrdiff_t s = t + static_cast<std::ptrdiff_t>(k) - half;
        if (s < 0 || s >= len) continue;
        const Real* xr = &X.data[(b * T + s) * c];
        const Real* w = &W.data[k * c];
        for (std::size_t j = 0; j < c; ++j) y[j] += xr[j] * w[j];
      }
    }
  }
  std::vector<Var<Real>> parents{x, weight};
  if (bias) parents.push_back(bias);
  return make_op<Real>(std::move(Y), std::move(parents), [layout, kernel, c, half](Node<Real>& self) {
    auto& x = self.parents[0];
    auto& w = self.parents[1];
    const std::size_t T = layout.max_len;
    Tensor<Real>* dx = x->requires_grad ? &x->grad_buffer() : nullptr;
    Tensor<Real>* dw = w->requires_grad ? &w->grad_buffer() : nullptr;
    Tensor<Real>* db = (self.parents.size() > 2 && self.parents[2]->requires_grad)
                           ? &self.parents[2]->grad_buffer()
                           : nullptr;
    for (std::size_t b = 0; b < layout.batch; ++b) {
      const auto len = static_cast<std::ptrdiff_t>(layout.lengths[b]);
      for (std::ptrdiff_t t = 0; t < len; ++t) {
        const Real* g = &self.grad.data[(b * T + t) * c];
        if (db)
          for (std::size_t j = 0; j < c; ++j) db->data[j] += g[j];
        for (std::size_t k = 0; k < kernel; ++k) {
          const std::ptrdiff_t s = t + static_cast<std::ptrdiff_t>(k) - half;
          if (s < 0 || s >= len) continue;
          for (std::size_t j = 0; j < c; ++j) {
            if (dx) dx->data[(b * T + s) * c + j] += g[j] * w->value.data[k * c + j];
            if (dw) dw->data[k * c + j] += g[j] * x->value.data[(b * T + s) * c + j];
          }
        }
      }
    }
  });
}

template <typename Real>
Var<Real> masked_attention(const Var<Real>& q, const Var<Real>& k, const Var<Real>& v,
                           const SeqLayout& layout, std::size_t heads,
                           AttentionProbe<Real>* probe) {
  require_layout(q->value, layout, "masked_attention");
  require_same_shape(q->value, k->value, "masked_attention");
  require_same_shape(q->value, v->value, "masked_attention");
  const std::size_t d = q->value.cols();
  require(heads >= 1 && d % heads == 0, ErrorCode::kInvalidArgument,
          "masked_attention: channels must be divisible by heads");
  const std::size_t dh = d / heads;
  const std::size_t T = layout.max_len;
  const Real inv_sqrt = Real(1) / std::sqrt(Real(dh));

  // probs[(b * heads + h)] is a [T x T] matrix, valid block only.
  std::vector<std::vector<Real>> probs(layout.batch * heads);
  Tensor<Real> Y({layout.rows(), d});
  const Real* Q = q->value.data.data();
  const Real* K = k->value.data.data();
  const Real* V = v->value.data.data();
  std::vector<Real> row;
  for (std::size_t b = 0; b < layout.batch; ++b) {
    const std::size_t len = layout.lengths[b];
    for (std::size_t h = 0; h < heads; ++h) {
      auto& P = probs[b * heads + h];
      P.assign(T * T, Real(0));
      for (std::size_t i = 0; i < len; ++i) {
        const Real* qi = &Q[(b * T + i) * d + h * dh];
        row.assign(len, Real(0));
        Real mx = -std::numeric_limits<Real>::infinity();
        for (std::size_t j = 0; j < len; ++j) {
          const Real* kj = &K[(b * T + j) * d + h * dh];
          Real s = 0;
          for (std::size_t e = 0; e < dh; ++e) s += qi[e] * kj[e];
          row[j] = s * inv_sqrt;
          mx = std::max(mx, row[j]);
        }
        Real z = 0;
        for (std::size_t j = 0; j < len; ++j) {
          row[j] = std::exp(row[j] - mx);
          z += row[j];
        }
        Real* yi = &Y.data[(b * T + i) * d + h * dh];
        for (std::size_t j = 0; j < len; ++j) {
          const Real pij = row[j] / z;
          P[i * T + j] = pij;
          const Real* vj = &V[(b * T + j) * d + h * dh];
          for (std::size_t e = 0; e < dh; ++e) yi[e] += pij * vj[e];
        }
      }
    }
  }
  if (probe) {
    probe->weights.clear();
    for (const auto& P : probs) probe->weights.emplace_back(Shape{T, T}, P);
  }
  return make_op<Real>(
      std::move(Y), {q, k, v},
      [layout, heads, d, dh, inv_sqrt, probs = std::move(probs)](Node<Real>& self) {
        auto& q = self.parents[0];
        auto& k = self.parents[1];
        auto& v = self.parents[2];
        const std::size_t T = layout.max_len;
        Tensor<Real>* dq = q->requires_grad ? &q->grad_buffer() : nullptr;
        Tensor<Real>* dk = k->requires_grad ? &k->grad_buffer() : nullptr;
        Tensor<Real>* dv = v->requires_grad ? &v->grad_buffer() : nullptr;
        const Real* Q = q->value.data.data();
        const Real* K = k->value.data.data();
        const Real* V = v->value.data.data();
        const Real* dY = self.grad.data.data();
        std::vector<Real> dp;
        for (std::size_t b = 0; b < layout.batch; ++b) {
          const std::size_t len = layout.lengths[b];
          for (std::size_t h = 0; h < heads; ++h) {
            const auto& P = probs[b * heads + h];
            for (std::size_t i = 0; i < len; ++i) {
              const Real* gi = &dY[(b * T + i) * d + h * dh];
              dp.assign(len, Real(0));
              Real dot = 0;
              for (std::size_t j = 0; j < len; ++j) {
                const Real* vj = &V[(b * T + j) * d + h * dh];
                Real s = 0;
                for (std::size_t e = 0; e < dh; ++e) s += gi[e] * vj[e];
                dp[j] = s;
                dot += s * P[i * T + j];
                if (dv) {
                  Real* dvj = &dv->data[(b * T + j) * d + h * dh];
                  for (std::size_t e = 0; e < dh; ++e) dvj[e] += P[i * T + j] * gi[e];
                }
              }
              const Real* qi = &Q[(b * T + i) * d + h * dh];
              for (std::size_t j = 0; j < len; ++j) {
                const Real ds = P[i * T + j] * (dp[j] - dot) * inv_sqrt;
                if (ds == Real(0)) continue;
                const Real* kj = &K[(b * T + j) * d + h * dh];
                if (dq) {
                  Real* dqi = &dq->data[(b * T + i) * d + h * dh];
                  for (std::size_t e = 0; e < dh; ++e) dqi[e] += ds * kj[e];
                }
                if (dk) {
                  Real* dkj = &dk->data[(b * T + j) * d + h * dh];
                  for (std::size_t e = 0; e < dh; ++e) dkj[e] += ds * qi[e];
                }
              }
            }
          }
        }
      });
}

template <typename Real>
Var<Real> mean_pool(const Var<Real>& x, const SeqLayout& layout) {
  Tensor<Real> Y = mean_pool_values(x->value, layout);
  const std::size_t d = x->value.cols();
  return make_op<Real>(std::move(Y), {x}, [layout, d](Node<Real>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t b = 0; b < layout.batch; ++b) {
      const Real inv = Real(1) / Real(layout.lengths[b]);
      for (std::size_t t = 0; t < layout.lengths[b]; ++t)
        for (std::size_t j = 0; j < d; ++j)
          g.data[(b * layout.max_len + t) * d + j] += self.grad.data[b * d + j] * inv;
    }
  });
}

template <typename Real>
Tensor<Real> mean_pool_values(const Tensor<Real>& x, const SeqLayout& layout) {
  require_layout(x, layout, "mean_pool");
  const std::size_t d = x.cols();
  Tensor<Real> Y({layout.batch, d});
  for (std::size_t b = 0; b < layout.batch; ++b) {
    const std::size_t len = layout.lengths[b];
    require(len > 0, ErrorCode::kInvalidArgument, "mean_pool: sequence has no valid frames");
    Real* y = &Y.data[b * d];
    for (std::size_t t = 0; t < len; ++t) {
      const Real* xr = &x.data[(b * layout.max_len + t) * d];
      for (std::size_t j = 0; j < d; ++j) y[j] += xr[j];
    }
    for (std::size_t j = 0; j < d; ++j) y[j] /= Real(len);
  }
  return Y;
}

template <typename Real>
Tensor<Real> positional_encoding(const SeqLayout& layout, std::size_t dim) {
  Tensor<Real> pe({layout.rows(), dim});
  for (std::size_t b = 0; b < layout.batch; ++b)
    for (std::size_t t = 0; t < layout.lengths[b]; ++t)
      for (std::size_t j = 0; j < dim; ++j) {
        const double freq = std::pow(10000.0, -static_cast<double>(2 * (j / 2)) / double(dim));
        const double angle = static_cast<double>(t) * freq;
        pe.data[(b * layout.max_len + t) * dim + j] =
            static_cast<Real>(j % 2 == 0 ? std::sin(angle) : std::cos(angle));
      }
  return pe;
}

template <typename Real>
Tensor<Real> softmax_rows(const Tensor<Real>& logits) {
  Tensor<Real> out = logits;
  const std::size_t n = logits.rows(), m = logits.cols();
  for (std::size_t i = 0; i < n; ++i) {
    Real* r = &out.data[i * m];
    const Real mx = *std::max_element(r, r + m);
    Real z = 0;
    for (std::size_t j = 0; j < m; ++j) {
      r[j] = std::exp(r[j] - mx);
      z += r[j];
    }
    for (std::size_t j = 0; j < m; ++j) r[j] /= z;
  }
  return out;
}

#define VAVL_INSTANTIATE_OPS(Real)                                                              \
  template Var<Real> add(const Var<Real>&, const Var<Real>&);                                   \
  template Var<Real> mul(const Var<Real>&, const Var<Real>&);                                   \
  template Var<Real> scale(const Var<Real>&, Real);                                             \
  template Var<Real> sum(const Var<Real>&);                                                     \
  template Var<Real> sum_squares(const Var<Real>&);                                             \
  template Var<Real> linear(const Var<Real>&, const Var<Real>&, const Var<Real>&);              \
  template Var<Real> relu(const Var<Real>&);                                                    \
  template Var<Real> silu(const Var<Real>&);                                                    \
  template Var<Real> glu(const Var<Real>&);                                                     \
  template Var<Real> layer_norm(const Var<Real>&, const Var<Real>&, const Var<Real>&, Real);   \
  template Var<Real> dropout(const Var<Real>&, Real, Rng*);                                     \
  template Var<Real> concat_cols(const Var<Real>&, const Var<Real>&);                           \
  template Var<Real> mask_rows(const Var<Real>&, const SeqLayout&);                             \
  template Var<Real> conv1d(const Var<Real>&, const Var<Real>&, const Var<Real>&,               \
                            const SeqLayout&);                                                  \
  template Var<Real> depthwise_conv1d(const Var<Real>&, const Var<Real>&, const Var<Real>&,     \
                                      const SeqLayout&);                                        \
  template Var<Real> masked_attention(const Var<Real>&, const Var<Real>&, const Var<Real>&,     \
                                      const SeqLayout&, std::size_t, AttentionProbe<Real>*);    \
  template Var<Real> mean_pool(const Var<Real>&, const SeqLayout&);                             \
  template Tensor<Real> mean_pool_values(const Tensor<Real>&, const SeqLayout&);                \
  template Tensor<Real> positional_encoding(const SeqLayout&, std::size_t);                     \
  template Tensor<Real> softmax_rows(const Tensor<Real>&);

VAVL_INSTANTIATE_OPS(float)
VAVL_INSTANTIATE_OPS(double)

#undef VAVL_INSTANTIATE_OPS

}  // namespace vavl::num

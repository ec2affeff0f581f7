// Copyright 2026 The symface Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "symface/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <utility>

#include "symface/errors.hpp"

namespace symface::ad {
namespace {

template <typename T>
using Backward = std::function<void(Node<T>&)>;

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
Tensor<T> make_result(const char* op, Shape shape, Buffer<T> value,
                      std::initializer_list<const Tensor<T>*> inputs, Backward<T> backward) {
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = op;
  bool needs_grad = false;
  if (grad_enabled())
    for (const Tensor<T>* in : inputs)
      if (in && in->defined() && in->requires_grad()) needs_grad = true;
  if (needs_grad) {
    n->requires_grad = true;
    for (const Tensor<T>* in : inputs)
      n->parents.push_back(in && in->defined() ? in->node_ptr() : nullptr);
    n->backward = std::move(backward);
  }
  return Tensor<T>(std::move(n));
}

// Gradient buffer of parent i, or nullptr when it takes no gradient.
template <typename T>
Buffer<T>* grad_of(Node<T>& self, std::size_t i) {
  Node<T>* p = self.parents[i].get();
  return (p && p->requires_grad) ? &p->grad_buffer() : nullptr;
}

template <typename T>
const Buffer<T>& value_of(Node<T>& self, std::size_t i) {
  return self.parents[i]->value;
}

// ---------------------------------------------------------------- broadcast

struct BroadcastPlan {
  Shape out;
  bool same = false;
  std::shared_ptr<std::vector<int>> ia;  // only set for the general case
  std::shared_ptr<std::vector<int>> ib;
};

std::vector<std::int64_t> strides_of(const Shape& s) {
  std::vector<std::int64_t> st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * s[i + 1];
  return st;
}

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b) {
  BroadcastPlan p;
  if (a == b) {
    p.out = a;
    p.same = true;
    return p;
  }
  const std::size_t r = std::max(a.size(), b.size());
  Shape ea(r, 1), eb(r, 1);
  std::copy(a.begin(), a.end(), ea.begin() + (r - a.size()));
  std::copy(b.begin(), b.end(), eb.begin() + (r - b.size()));
  p.out.resize(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (ea[i] != eb[i] && ea[i] != 1 && eb[i] != 1)
      throw ShapeError("cannot broadcast " + to_string(a) + " with " + to_string(b));
    p.out[i] = std::max(ea[i], eb[i]);
  }
  const auto sa = strides_of(ea), sb = strides_of(eb);
  const std::int64_t n = numel(p.out);
  p.ia = std::make_shared<std::vector<int>>(n);
  p.ib = std::make_shared<std::vector<int>>(n);
  std::vector<int> idx(r, 0);
  for (std::int64_t k = 0; k < n; ++k) {
    std::int64_t oa = 0, ob = 0;
    for (std::size_t i = 0; i < r; ++i) {
      if (ea[i] != 1) oa += idx[i] * sa[i];
      if (eb[i] != 1) ob += idx[i] * sb[i];
    }
    (*p.ia)[k] = static_cast<int>(oa);
    (*p.ib)[k] = static_cast<int>(ob);
    for (int i = static_cast<int>(r) - 1; i >= 0; --i) {
      if (++idx[i] < p.out[i]) break;
      idx[i] = 0;
    }
  }
  return p;
}

enum class BinOp { kAdd, kSub, kMul };

template <typename T>
Tensor<T> binary(const char* name, BinOp op, const Tensor<T>& a, const Tensor<T>& b) {
  BroadcastPlan plan = plan_broadcast(a.shape(), b.shape());
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  const std::int64_t n = numel(plan.out);
  Buffer<T> out(n);
  auto apply = [op](T x, T y) {
    switch (op) {
      case BinOp::kAdd: return x + y;
      case BinOp::kSub: return x - y;
      default: return x * y;
    }
  };
  if (plan.same) {
    for (std::int64_t i = 0; i < n; ++i) out[i] = apply(av[i], bv[i]);
  } else {
    const auto& ia = *plan.ia;
    const auto& ib = *plan.ib;
    for (std::int64_t i = 0; i < n; ++i) out[i] = apply(av[ia[i]], bv[ib[i]]);
  }
  auto ia = plan.ia;
  auto ib = plan.ib;
  return make_result<T>(name, plan.out, std::move(out), {&a, &b}, [op, ia, ib](Node<T>& self) {
    const auto& g = self.grad;
    const std::size_t n = g.size();
    auto index_a = [&](std::size_t i) { return ia ? static_cast<std::size_t>((*ia)[i]) : i; };
    auto index_b = [&](std::size_t i) { return ib ? static_cast<std::size_t>((*ib)[i]) : i; };
    if (auto* ga = grad_of(self, 0)) {
      if (op == BinOp::kMul) {
        const auto& bv = value_of(self, 1);
        for (std::size_t i = 0; i < n; ++i) (*ga)[index_a(i)] += g[i] * bv[index_b(i)];
      } else {
        for (std::size_t i = 0; i < n; ++i) (*ga)[index_a(i)] += g[i];
      }
    }
    if (auto* gb = grad_of(self, 1)) {
      if (op == BinOp::kMul) {
        const auto& av = value_of(self, 0);
        for (std::size_t i = 0; i < n; ++i) (*gb)[index_b(i)] += g[i] * av[index_a(i)];
      } else if (op == BinOp::kSub) {
        for (std::size_t i = 0; i < n; ++i) (*gb)[index_b(i)] -= g[i];
      } else {
        for (std::size_t i = 0; i < n; ++i) (*gb)[index_b(i)] += g[i];
      }
    }
  });
}

// ---------------------------------------------------------------- unary

// `deriv(x, y)` returns dy/dx given input x and output y.
template <typename T, typename F, typename D>
Tensor<T> unary(const char* name, const Tensor<T>& x, F f, D deriv) {
  const auto& xv = x.node()->value;
  Buffer<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return make_result<T>(name, x.shape(), std::move(out), {&x}, [deriv](Node<T>& self) {
    auto* gx = grad_of(self, 0);
    if (!gx) return;
    const auto& xv = value_of(self, 0);
    for (std::size_t i = 0; i < xv.size(); ++i) (*gx)[i] += self.grad[i] * deriv(xv[i], self.value[i]);
  });
}

std::shared_ptr<const std::vector<int>> make_index(std::vector<int> v) {
  return std::make_shared<const std::vector<int>>(std::move(v));
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary("add", BinOp::kAdd, a, b);
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary("sub", BinOp::kSub, a, b);
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary("mul", BinOp::kMul, a, b);
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return unary("scale", a, [factor](T x) { return x * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T offset) {
  return unary("add_scalar", a, [offset](T x) { return x + offset; }, [](T, T) { return T{1}; });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T kInvSqrt2 = T(0.70710678118654752440);
  const T kInvSqrt2Pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
  return unary(
      "gelu", x, [](T v) { return T(0.5) * v * (T(1) + std::erf(v * kInvSqrt2)); },
      [kInvSqrt2Pi](T v, T) {
        return T(0.5) * (T(1) + std::erf(v * kInvSqrt2)) + v * kInvSqrt2Pi * std::exp(T(-0.5) * v * v);
      });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  return unary(
      "leaky_relu", x, [slope](T v) { return v > T(0) ? v : slope * v; },
      [slope](T v, T) { return v > T(0) ? T(1) : slope; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(
      "sigmoid", x,
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary("tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  return unary("log", x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  return unary(
      "abs", x, [](T v) { return std::abs(v); },
      [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return unary("square", x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  return unary(
      "clamp", x, [lo, hi](T v) { return std::clamp(v, lo, hi); },
      [lo, hi](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T s{0};
  for (T v : x.values()) s += v;
  return make_result<T>("sum", {}, {s}, {&x}, [](Node<T>& self) {
    auto* gx = grad_of(self, 0);
    if (!gx) return;
    for (T& v : *gx) v += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.numel() == 0) throw ShapeError("mean of empty tensor");
  return mean_trailing(x, 0);
}

template <typename T>
Tensor<T> mean_trailing(const Tensor<T>& x, int first_axis) {
  if (first_axis < 0 || first_axis > x.rank()) throw ShapeError("mean_trailing: bad axis");
  Shape outer_shape(x.shape().begin(), x.shape().begin() + first_axis);
  const std::int64_t outer = numel(outer_shape);
  const std::int64_t inner = outer ? x.numel() / outer : 0;
  if (inner == 0) throw ShapeError("mean_trailing: empty reduction");
  const auto& xv = x.node()->value;
  Buffer<T> out(outer);
  for (std::int64_t o = 0; o < outer; ++o) {
    T s{0};
    for (std::int64_t i = 0; i < inner; ++i) s += xv[o * inner + i];
    out[o] = s / static_cast<T>(inner);
  }
  const char* name = first_axis == 0 ? "mean" : "mean_trailing";
  return make_result<T>(name, std::move(outer_shape), std::move(out), {&x},
                        [outer, inner](Node<T>& self) {
                          auto* gx = grad_of(self, 0);
                          if (!gx) return;
                          const T inv = T(1) / static_cast<T>(inner);
                          for (std::int64_t o = 0; o < outer; ++o) {
                            const T g = self.grad[o] * inv;
                            for (std::int64_t i = 0; i < inner; ++i) (*gx)[o * inner + i] += g;
                          }
                        });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (w.rank() != 2 || x.rank() < 1 || x.dim(-1) != w.dim(0))
    throw ShapeError("linear: x " + to_string(x.shape()) + " vs w " + to_string(w.shape()));
  const int in = w.dim(0), outd = w.dim(1);
  if (b.defined() && (b.rank() != 1 || b.dim(0) != outd)) throw ShapeError("linear: bias shape");
  const std::int64_t rows = x.numel() / in;
  Shape shape = x.shape();
  shape.back() = outd;
  Buffer<T> out(rows * outd);
  {
    ConstMapMat<T> X(x.node()->value.data(), rows, in);
    ConstMapMat<T> W(w.node()->value.data(), in, outd);
    MapMat<T> Y(out.data(), rows, outd);
    Y.noalias() = X * W;
    if (b.defined()) {
      Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> B(b.node()->value.data(), outd);
      Y.rowwise() += B;
    }
  }
  return make_result<T>("linear", std::move(shape), std::move(out), {&x, &w, &b},
                        [rows, in, outd](Node<T>& self) {
                          ConstMapMat<T> G(self.grad.data(), rows, outd);
                          if (auto* gx = grad_of(self, 0)) {
                            ConstMapMat<T> W(value_of(self, 1).data(), in, outd);
                            MapMat<T> GX(gx->data(), rows, in);
                            GX.noalias() += G * W.transpose();
                          }
                          if (auto* gw = grad_of(self, 1)) {
                            ConstMapMat<T> X(value_of(self, 0).data(), rows, in);
                            MapMat<T> GW(gw->data(), in, outd);
                            GW.noalias() += X.transpose() * G;
                          }
                          if (self.parents[2]) {
                            if (auto* gb = grad_of(self, 2)) {
                              Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> GB(gb->data(), outd);
                              GB += G.colwise().sum();
                            }
                          }
                        });
}

template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool transpose_b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0))
    throw ShapeError("bmm: " + to_string(a.shape()) + " x " + to_string(b.shape()));
  const int g = a.dim(0), m = a.dim(1), k = a.dim(2);
  const int kb = transpose_b ? b.dim(2) : b.dim(1);
  const int n = transpose_b ? b.dim(1) : b.dim(2);
  if (k != kb) throw ShapeError("bmm: inner dimensions differ");
  Buffer<T> out(static_cast<std::size_t>(g) * m * n);
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  for (int i = 0; i < g; ++i) {
    ConstMapMat<T> A(av.data() + static_cast<std::size_t>(i) * m * k, m, k);
    MapMat<T> Y(out.data() + static_cast<std::size_t>(i) * m * n, m, n);
    if (transpose_b) {
      ConstMapMat<T> B(bv.data() + static_cast<std::size_t>(i) * n * k, n, k);
      Y.noalias() = A * B.transpose();
    } else {
      ConstMapMat<T> B(bv.data() + static_cast<std::size_t>(i) * k * n, k, n);
      Y.noalias() = A * B;
    }
  }
  return make_result<T>("bmm", {g, m, n}, std::move(out), {&a, &b},
                        [g, m, k, n, transpose_b](Node<T>& self) {
                          auto* ga = grad_of(self, 0);
                          auto* gb = grad_of(self, 1);
                          const auto& av = value_of(self, 0);
                          const auto& bv = value_of(self, 1);
                          for (int i = 0; i < g; ++i) {
                            ConstMapMat<T> G(self.grad.data() + static_cast<std::size_t>(i) * m * n, m, n);
                            const std::size_t ao = static_cast<std::size_t>(i) * m * k;
                            const std::size_t bo = static_cast<std::size_t>(i) * k * n;
                            if (transpose_b) {
                              ConstMapMat<T> B(bv.data() + bo, n, k);
                              if (ga) MapMat<T>(ga->data() + ao, m, k).noalias() += G * B;
                              if (gb) {
                                ConstMapMat<T> A(av.data() + ao, m, k);
                                MapMat<T>(gb->data() + bo, n, k).noalias() += G.transpose() * A;
                              }
                            } else {
                              ConstMapMat<T> B(bv.data() + bo, k, n);
                              if (ga) MapMat<T>(ga->data() + ao, m, k).noalias() += G * B.transpose();
                              if (gb) {
                                ConstMapMat<T> A(av.data() + ao, m, k);
                                MapMat<T>(gb->data() + bo, k, n).noalias() += A.transpose() * G;
                              }
                            }
                          }
                        });
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride, int padding) {
  if (x.rank() != 4 || w.rank() != 4 || x.dim(1) != w.dim(1) || w.dim(2) != w.dim(3))
    throw ShapeError("conv2d: x " + to_string(x.shape()) + " w " + to_string(w.shape()));
  if (stride < 1 || padding < 0) throw ParameterError("conv2d: stride >= 1 and padding >= 0 required");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int O = w.dim(0), K = w.dim(2);
  const int Ho = (H + 2 * padding - K) / stride + 1;
  const int Wo = (W + 2 * padding - K) / stride + 1;
  if (H + 2 * padding < K || W + 2 * padding < K || Ho <= 0 || Wo <= 0)
    throw ShapeError("conv2d: input " + to_string(x.shape()) + " too small for kernel");
  if (b.defined() && (b.rank() != 1 || b.dim(0) != O)) throw ShapeError("conv2d: bias shape");
  const int ckk = C * K * K;
  const int hw = Ho * Wo;
  const std::size_t cols_wide = static_cast<std::size_t>(N) * hw;

  // im2col for the whole batch: row (c, ki, kj), column (n, oh, ow), so the
  // forward pass and the weight gradient are one GEMM each.
  auto cols = std::make_shared<Buffer<T>>(static_cast<std::size_t>(ckk) * cols_wide, T{0});
  const auto& xv = x.node()->value;
  for (int c = 0; c < C; ++c)
    for (int ki = 0; ki < K; ++ki)
      for (int kj = 0; kj < K; ++kj) {
        T* row = cols->data() + static_cast<std::size_t>((c * K + ki) * K + kj) * cols_wide;
        for (int n = 0; n < N; ++n) {
          const T* img = xv.data() + (static_cast<std::size_t>(n) * C + c) * H * W;
          T* dst = row + static_cast<std::size_t>(n) * hw;
          for (int oh = 0; oh < Ho; ++oh) {
            const int ih = oh * stride - padding + ki;
            if (ih < 0 || ih >= H) continue;
            const T* src = img + static_cast<std::size_t>(ih) * W;
            for (int ow = 0; ow < Wo; ++ow) {
              const int iw = ow * stride - padding + kj;
              if (iw >= 0 && iw < W) dst[oh * Wo + ow] = src[iw];
            }
          }
        }
      }

  RowMat<T> Y(O, static_cast<Eigen::Index>(cols_wide));
  Y.noalias() = ConstMapMat<T>(w.node()->value.data(), O, ckk) *
                ConstMapMat<T>(cols->data(), ckk, static_cast<Eigen::Index>(cols_wide));
  Buffer<T> out(static_cast<std::size_t>(N) * O * hw);
  for (int n = 0; n < N; ++n)
    for (int o = 0; o < O; ++o) {
      const T bias = b.defined() ? b.node()->value[o] : T{0};
      const T* src = Y.data() + static_cast<std::size_t>(o) * cols_wide + static_cast<std::size_t>(n) * hw;
      T* dst = out.data() + (static_cast<std::size_t>(n) * O + o) * hw;
      for (int p = 0; p < hw; ++p) dst[p] = src[p] + bias;
    }

  // The columns are only needed again for the weight gradient.
  const bool keep_cols = grad_enabled() && w.requires_grad();
  auto saved = keep_cols ? cols : nullptr;
  cols.reset();

  return make_result<T>(
      "conv2d", {N, O, Ho, Wo}, std::move(out), {&x, &w, &b},
      [=](Node<T>& self) {
        auto* gx = grad_of(self, 0);
        auto* gw = grad_of(self, 1);
        Buffer<T>* gb = self.parents[2] ? grad_of(self, 2) : nullptr;
        const auto wide = static_cast<Eigen::Index>(cols_wide);
        RowMat<T> G(O, wide);
        for (int n = 0; n < N; ++n)
          for (int o = 0; o < O; ++o) {
            const T* src = self.grad.data() + (static_cast<std::size_t>(n) * O + o) * hw;
            std::copy(src, src + hw, G.data() + static_cast<std::size_t>(o) * cols_wide + static_cast<std::size_t>(n) * hw);
          }
        if (gw) MapMat<T>(gw->data(), O, ckk).noalias() += G * ConstMapMat<T>(saved->data(), ckk, wide).transpose();
        if (gb) Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(gb->data(), O) += G.rowwise().sum();
        if (!gx) return;
        RowMat<T> D(ckk, wide);
        D.noalias() = ConstMapMat<T>(value_of(self, 1).data(), O, ckk).transpose() * G;
        for (int c = 0; c < C; ++c)
          for (int ki = 0; ki < K; ++ki)
            for (int kj = 0; kj < K; ++kj) {
              const T* row = D.data() + static_cast<std::size_t>((c * K + ki) * K + kj) * cols_wide;
              for (int n = 0; n < N; ++n) {
                T* img = gx->data() + (static_cast<std::size_t>(n) * C + c) * H * W;
                const T* src = row + static_cast<std::size_t>(n) * hw;
                for (int oh = 0; oh < Ho; ++oh) {
                  const int ih = oh * stride - padding + ki;
                  if (ih < 0 || ih >= H) continue;
                  T* dst = img + static_cast<std::size_t>(ih) * W;
                  for (int ow = 0; ow < Wo; ++ow) {
                    const int iw = ow * stride - padding + kj;
                    if (iw >= 0 && iw < W) dst[iw] += src[oh * Wo + ow];
                  }
                }
              }
            }
      });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  const int d = x.dim(-1);
  if (gamma.numel() != d || beta.numel() != d) throw ShapeError("layer_norm: affine size");
  const std::int64_t rows = x.numel() / d;
  const auto& xv = x.node()->value;
  const auto& gv = gamma.node()->value;
  const auto& bv = beta.node()->value;
  auto xhat = std::make_shared<Buffer<T>>(xv.size());
  auto rstd = std::make_shared<Buffer<T>>(rows);
  Buffer<T> out(xv.size());
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* row = xv.data() + r * d;
    T mu{0};
    for (int i = 0; i < d; ++i) mu += row[i];
    mu /= d;
    T var{0};
    for (int i = 0; i < d; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= d;
    const T rs = T(1) / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (int i = 0; i < d; ++i) {
      const T h = (row[i] - mu) * rs;
      (*xhat)[r * d + i] = h;
      out[r * d + i] = h * gv[i] + bv[i];
    }
  }
  return make_result<T>("layer_norm", x.shape(), std::move(out), {&x, &gamma, &beta},
                        [=](Node<T>& self) {
                          auto* gx = grad_of(self, 0);
                          auto* gg = grad_of(self, 1);
                          auto* gbeta = grad_of(self, 2);
                          const auto& gv = value_of(self, 1);
                          Buffer<T> dxhat(d);
                          for (std::int64_t r = 0; r < rows; ++r) {
                            const T* g = self.grad.data() + r * d;
                            const T* h = xhat->data() + r * d;
                            T s1{0}, s2{0};
                            for (int i = 0; i < d; ++i) {
                              if (gg) (*gg)[i] += g[i] * h[i];
                              if (gbeta) (*gbeta)[i] += g[i];
                              dxhat[i] = g[i] * gv[i];
                              s1 += dxhat[i];
                              s2 += dxhat[i] * h[i];
                            }
                            if (gx) {
                              const T rs = (*rstd)[r];
                              for (int i = 0; i < d; ++i)
                                (*gx)[r * d + i] += rs * (dxhat[i] - (s1 + h[i] * s2) / static_cast<T>(d));
                            }
                          }
                        });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
  const int d = x.dim(-1);
  const std::int64_t rows = x.numel() / d;
  const auto& xv = x.node()->value;
  Buffer<T> out(xv.size());
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* in = xv.data() + r * d;
    T* y = out.data() + r * d;
    const T mx = *std::max_element(in, in + d);
    if (!std::isfinite(mx)) throw NumericError("softmax: row without a finite entry");
    T s{0};
    for (int i = 0; i < d; ++i) {
      y[i] = std::exp(in[i] - mx);
      s += y[i];
    }
    for (int i = 0; i < d; ++i) y[i] /= s;
  }
  return make_result<T>("softmax", x.shape(), std::move(out), {&x}, [d, rows](Node<T>& self) {
    auto* gx = grad_of(self, 0);
    if (!gx) return;
    for (std::int64_t r = 0; r < rows; ++r) {
      const T* y = self.value.data() + r * d;
      const T* g = self.grad.data() + r * d;
      T dot{0};
      for (int i = 0; i < d; ++i) dot += g[i] * y[i];
      for (int i = 0; i < d; ++i) (*gx)[r * d + i] += y[i] * (g[i] - dot);
    }
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.numel())
    throw ShapeError("reshape: " + to_string(x.shape()) + " -> " + to_string(shape));
  Buffer<T> out(x.values().begin(), x.values().end());
  return make_result<T>("reshape", std::move(shape), std::move(out), {&x}, [](Node<T>& self) {
    auto* gx = grad_of(self, 0);
    if (!gx) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) (*gx)[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> gather(const Tensor<T>& x, std::shared_ptr<const std::vector<int>> index, Shape shape,
                 const char* op_name) {
  if (numel(shape) != static_cast<std::int64_t>(index->size()))
    throw ShapeError(std::string(op_name) + ": index count does not match shape");
  const auto& xv = x.node()->value;
  Buffer<T> out(index->size());
  for (std::size_t i = 0; i < index->size(); ++i) out[i] = xv[(*index)[i]];
  return make_result<T>(op_name, std::move(shape), std::move(out), {&x}, [index](Node<T>& self) {
    auto* gx = grad_of(self, 0);
    if (!gx) return;
    const auto& idx = *index;
    for (std::size_t i = 0; i < idx.size(); ++i) (*gx)[idx[i]] += self.grad[i];
  });
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<int>& perm) {
  const int r = x.rank();
  if (static_cast<int>(perm.size()) != r) throw ShapeError("permute: rank mismatch");
  Shape out_shape(r);
  for (int i = 0; i < r; ++i) out_shape[i] = x.shape()[perm[i]];
  const auto in_strides = strides_of(x.shape());
  std::vector<int> index(x.numel());
  std::vector<int> idx(r, 0);
  for (std::size_t k = 0; k < index.size(); ++k) {
    std::int64_t off = 0;
    for (int i = 0; i < r; ++i) off += idx[i] * in_strides[perm[i]];
    index[k] = static_cast<int>(off);
    for (int i = r - 1; i >= 0; --i) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  return gather(x, make_index(std::move(index)), std::move(out_shape), "permute");
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& s0 = parts[0].shape();
  const int r = static_cast<int>(s0.size());
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) throw ShapeError("concat: bad axis");
  Shape out_shape = s0;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    if (p.rank() != r) throw ShapeError("concat: rank mismatch");
    for (int i = 0; i < r; ++i)
      if (i != axis && p.shape()[i] != s0[i]) throw ShapeError("concat: shape mismatch");
    out_shape[axis] += p.shape()[axis];
  }
  const std::int64_t outer = numel(Shape(s0.begin(), s0.begin() + axis));
  std::int64_t tail = 1;
  for (int i = axis + 1; i < r; ++i) tail *= s0[i];
  std::vector<std::int64_t> block(parts.size());
  std::int64_t row = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    block[p] = parts[p].shape()[axis] * tail;
    row += block[p];
  }
  Buffer<T> out(outer * row);
  for (std::int64_t o = 0; o < outer; ++o) {
    std::int64_t at = o * row;
    for (std::size_t p = 0; p < parts.size(); ++p) {
      const T* src = parts[p].node()->value.data() + o * block[p];
      std::copy(src, src + block[p], out.begin() + at);
      at += block[p];
    }
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(out_shape);
  node->value = std::move(out);
  node->op = "concat";
  bool needs = false;
  if (grad_enabled())
    for (const auto& p : parts) needs = needs || p.requires_grad();
  if (needs) {
    node->requires_grad = true;
    for (const auto& p : parts) node->parents.push_back(p.node_ptr());
    node->backward = [outer, row, block](Node<T>& self) {
      std::int64_t offset = 0;
      for (std::size_t p = 0; p < block.size(); ++p) {
        if (auto* gp = grad_of(self, p)) {
          for (std::int64_t o = 0; o < outer; ++o)
            for (std::int64_t i = 0; i < block[p]; ++i)
              (*gp)[o * block[p] + i] += self.grad[o * row + offset + i];
        }
        offset += block[p];
      }
    };
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
Tensor<T> select(const Tensor<T>& x, int index) {
  if (x.rank() < 1 || index < 0 || index >= x.dim(0)) throw ShapeError("select: index out of range");
  Shape shape(x.shape().begin() + 1, x.shape().end());
  const std::int64_t block = numel(shape);
  Buffer<T> out(x.values().begin() + block * index, x.values().begin() + block * (index + 1));
  return make_result<T>("select", std::move(shape), std::move(out), {&x},
                        [block, index](Node<T>& self) {
                          auto* gx = grad_of(self, 0);
                          if (!gx) return;
                          for (std::int64_t i = 0; i < block; ++i) (*gx)[block * index + i] += self.grad[i];
                        });
}

template <typename T>
Tensor<T> roll2d(const Tensor<T>& x, int dh, int dw) {
  if (x.rank() != 4) throw ShapeError("roll2d: expected [B,H,W,C]");
  const int B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  std::vector<int> index(x.numel());
  std::size_t k = 0;
  for (int b = 0; b < B; ++b)
    for (int h = 0; h < H; ++h)
      for (int w = 0; w < W; ++w) {
        const int sh = ((h - dh) % H + H) % H;
        const int sw = ((w - dw) % W + W) % W;
        const int base = ((b * H + sh) * W + sw) * C;
        for (int c = 0; c < C; ++c) index[k++] = base + c;
      }
  return gather(x, make_index(std::move(index)), x.shape(), "roll");
}

template <typename T>
Tensor<T> window_partition(const Tensor<T>& x, int window) {
  if (x.rank() != 4) throw ShapeError("window_partition: expected [B,H,W,C]");
  const int B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  if (window < 1 || H % window != 0 || W % window != 0)
    throw ShapeError("window_partition: " + std::to_string(H) + "x" + std::to_string(W) +
                     " not divisible by window " + std::to_string(window));
  const int nh = H / window, nw = W / window;
  std::vector<int> index(x.numel());
  std::size_t k = 0;
  for (int b = 0; b < B; ++b)
    for (int wh = 0; wh < nh; ++wh)
      for (int ww = 0; ww < nw; ++ww)
        for (int i = 0; i < window; ++i)
          for (int j = 0; j < window; ++j) {
            const int base = ((b * H + wh * window + i) * W + ww * window + j) * C;
            for (int c = 0; c < C; ++c) index[k++] = base + c;
          }
  return gather(x, make_index(std::move(index)), {B * nh * nw, window * window, C}, "window_partition");
}

template <typename T>
Tensor<T> window_reverse(const Tensor<T>& windows, int window, int height, int width) {
  if (windows.rank() != 3 || windows.dim(1) != window * window)
    throw ShapeError("window_reverse: expected [B*nW, ws*ws, C]");
  if (height % window != 0 || width % window != 0)
    throw ShapeError("window_reverse: size not divisible by window");
  const int nh = height / window, nw = width / window;
  if (windows.dim(0) % (nh * nw) != 0) throw ShapeError("window_reverse: window count");
  const int B = windows.dim(0) / (nh * nw), C = windows.dim(2);
  std::vector<int> index(windows.numel());
  std::size_t k = 0;
  for (int b = 0; b < B; ++b)
    for (int h = 0; h < height; ++h)
      for (int w = 0; w < width; ++w) {
        const int win = (b * nh + h / window) * nw + w / window;
        const int pos = (h % window) * window + (w % window);
        const int base = (win * window * window + pos) * C;
        for (int c = 0; c < C; ++c) index[k++] = base + c;
      }
  return gather(windows, make_index(std::move(index)), {B, height, width, C}, "window_reverse");
}

template <typename T>
Tensor<T> stop_gradient(const Tensor<T>& x) {
  auto n = std::make_shared<Node<T>>();
  n->shape = x.shape();
  n->value.assign(x.values().begin(), x.values().end());
  n->op = "stop_gradient";
  return Tensor<T>(std::move(n));
}

#define SYMFACE_INSTANTIATE(T)                                                                   \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> scale(const Tensor<T>&, T);                                                 \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                            \
  template Tensor<T> gelu(const Tensor<T>&);                                                     \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                            \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                  \
  template Tensor<T> tanh(const Tensor<T>&);                                                     \
  template Tensor<T> log(const Tensor<T>&);                                                      \
  template Tensor<T> abs(const Tensor<T>&);                                                      \
  template Tensor<T> square(const Tensor<T>&);                                                   \
  template Tensor<T> clamp(const Tensor<T>&, T, T);                                              \
  template Tensor<T> sum(const Tensor<T>&);                                                      \
  template Tensor<T> mean(const Tensor<T>&);                                                     \
  template Tensor<T> mean_trailing(const Tensor<T>&, int);                                       \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> bmm(const Tensor<T>&, const Tensor<T>&, bool);                              \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int);     \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);        \
  template Tensor<T> softmax(const Tensor<T>&);                                                  \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                           \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<int>&);                         \
  template Tensor<T> gather(const Tensor<T>&, std::shared_ptr<const std::vector<int>>, Shape,    \
                            const char*);                                                        \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                                 \
  template Tensor<T> select(const Tensor<T>&, int);                                              \
  template Tensor<T> roll2d(const Tensor<T>&, int, int);                                         \
  template Tensor<T> window_partition(const Tensor<T>&, int);                                    \
  template Tensor<T> window_reverse(const Tensor<T>&, int, int, int);                            \
  template Tensor<T> stop_gradient(const Tensor<T>&);

SYMFACE_INSTANTIATE(float)
SYMFACE_INSTANTIATE(double)

#undef SYMFACE_INSTANTIATE

}  // namespace symface::ad

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

// Differentiable operations. Every function here has a matching backward
// rule and is exercised by the finite-difference suite in
// tests/unit/test_tensor_ops.cpp.

#pragma once

#include <memory>
#include <vector>

#include "symface/tensor.hpp"

namespace symface::ad {

// Elementwise arithmetic with numpy-style broadcasting.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T offset);

// Pointwise nonlinearities.
template <typename T> Tensor<T> gelu(const Tensor<T>& x);
template <typename T> Tensor<T> leaky_relu(const Tensor<T>& x, T slope);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> tanh(const Tensor<T>& x);
template <typename T> Tensor<T> log(const Tensor<T>& x);
template <typename T> Tensor<T> abs(const Tensor<T>& x);
template <typename T> Tensor<T> square(const Tensor<T>& x);
/// Gradient passes where lo <= x <= hi, zero elsewhere.
template <typename T> Tensor<T> clamp(const Tensor<T>& x, T lo, T hi);

// Reductions.
template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);
/// Mean over every axis from `first_axis` on; result has shape[:first_axis].
template <typename T> Tensor<T> mean_trailing(const Tensor<T>& x, int first_axis);

// Linear algebra.
/// x[..., in] * w[in, out] (+ b[out]); `b` may be undefined.
template <typename T> Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);
/// Batched a[g, m, k] * b[g, k, n], or b[g, n, k] transposed when transpose_b.
template <typename T> Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool transpose_b);
/// x[N, C, H, W] convolved with w[O, C, k, k] (+ b[O]); `b` may be undefined.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride, int padding);

// Normalization.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps = T(1e-5));
/// Softmax over the last axis. Entries of -inf receive zero probability.
template <typename T> Tensor<T> softmax(const Tensor<T>& x);

// Layout.
template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T> Tensor<T> permute(const Tensor<T>& x, const std::vector<int>& perm);
/// y[i] = x[index[i]]; the generic building block of every layout op below.
template <typename T>
Tensor<T> gather(const Tensor<T>& x, std::shared_ptr<const std::vector<int>> index, Shape shape,
                 const char* op_name = "gather");
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);
/// x[i, ...] for the leading axis.
template <typename T> Tensor<T> select(const Tensor<T>& x, int index);
/// Cyclic shift of x[B, H, W, C] by (dh, dw) along H and W.
template <typename T> Tensor<T> roll2d(const Tensor<T>& x, int dh, int dw);
/// x[B, H, W, C] -> [B * nW, ws * ws, C], windows in row-major order.
template <typename T> Tensor<T> window_partition(const Tensor<T>& x, int window);
/// Inverse of window_partition.
template <typename T>
Tensor<T> window_reverse(const Tensor<T>& windows, int window, int height, int width);

/// Same values, no gradient path to the input.
template <typename T> Tensor<T> stop_gradient(const Tensor<T>& x);

}  // namespace symface::ad

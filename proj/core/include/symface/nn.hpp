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

#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "symface/grid.hpp"
#include "symface/ops.hpp"
#include "symface/rng.hpp"
#include "symface/tensor.hpp"

namespace symface::nn {

using ad::Shape;
using ad::Tensor;

/// kFrozen routes every parameter through stop_gradient, so the forward pass
/// contributes no gradient to the module's own weights.
enum class ParamMode { kTrainable, kFrozen };

template <typename T>
Tensor<T> use(const Tensor<T>& p, ParamMode mode) {
  return mode == ParamMode::kFrozen ? ad::stop_gradient(p) : p;
}

/// Ordered, named collection of trainable leaves.
template <typename T>
class ParameterSet {
 public:
  Tensor<T> add(std::string name, Shape shape, std::vector<T> values) {
    for (const auto& [n, _] : entries_)
      if (n == name) throw ParameterError("duplicate parameter name " + name);
    Tensor<T> t = Tensor<T>::parameter(std::move(shape), std::move(values));
    entries_.emplace_back(std::move(name), t);
    return t;
  }

  /// Registers an existing tensor (shared, not copied).
  void adopt(std::string name, const Tensor<T>& t) {
    for (const auto& [n, _] : entries_)
      if (n == name) throw ParameterError("duplicate parameter name " + name);
    entries_.emplace_back(std::move(name), t);
  }

  const std::vector<std::pair<std::string, Tensor<T>>>& entries() const { return entries_; }
  std::vector<std::pair<std::string, Tensor<T>>>& entries() { return entries_; }

  const Tensor<T>* find(const std::string& name) const {
    for (const auto& [n, t] : entries_)
      if (n == name) return &t;
    return nullptr;
  }

  void zero_grad() {
    for (auto& [_, t] : entries_) t.zero_grad();
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : entries_) n += static_cast<std::size_t>(t.numel());
    return n;
  }

  /// Flat copy of every value, in registration order.
  std::vector<T> flatten() const {
    std::vector<T> out;
    out.reserve(scalar_count());
    for (const auto& [_, t] : entries_) out.insert(out.end(), t.values().begin(), t.values().end());
    return out;
  }

 private:
  std::vector<std::pair<std::string, Tensor<T>>> entries_;
};

/// Truncated normal (sigma 0.02) weights, zero bias.
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(ParameterSet<T>& params, const std::string& name, int in, int out, Rng& rng, bool bias = true)
      : in_(in), out_(out) {
    std::vector<T> w(static_cast<std::size_t>(in) * out);
    for (T& v : w) v = static_cast<T>(rng.truncated_normal(0.02));
    weight_ = params.add(name + ".weight", {in, out}, std::move(w));
    if (bias) bias_ = params.add(name + ".bias", {out}, std::vector<T>(out, T{0}));
  }

  Tensor<T> operator()(const Tensor<T>& x, ParamMode mode = ParamMode::kTrainable) const {
    return ad::linear(x, use(weight_, mode), bias_.defined() ? use(bias_, mode) : Tensor<T>());
  }

  int in_features() const { return in_; }
  int out_features() const { return out_; }

 private:
  int in_ = 0;
  int out_ = 0;
  Tensor<T> weight_;
  Tensor<T> bias_;
};

template <typename T>
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParameterSet<T>& params, const std::string& name, int dim) {
    gamma_ = params.add(name + ".gamma", {dim}, std::vector<T>(dim, T{1}));
    beta_ = params.add(name + ".beta", {dim}, std::vector<T>(dim, T{0}));
  }

  Tensor<T> operator()(const Tensor<T>& x, ParamMode mode = ParamMode::kTrainable) const {
    return ad::layer_norm(x, use(gamma_, mode), use(beta_, mode));
  }

 private:
  Tensor<T> gamma_;
  Tensor<T> beta_;
};

/// Square-kernel convolution with fan-in (Kaiming) initialization for a
/// leaky-ReLU of the given slope.
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParameterSet<T>& params, const std::string& name, int in, int out, int kernel, int stride,
         int padding, Rng& rng, double leaky_slope = 0.2)
      : stride_(stride), padding_(padding) {
    const double fan_in = static_cast<double>(in) * kernel * kernel;
    const double sigma = std::sqrt(2.0 / ((1.0 + leaky_slope * leaky_slope) * fan_in));
    std::vector<T> w(static_cast<std::size_t>(out) * in * kernel * kernel);
    for (T& v : w) v = static_cast<T>(rng.normal() * sigma);
    weight_ = params.add(name + ".weight", {out, in, kernel, kernel}, std::move(w));
    bias_ = params.add(name + ".bias", {out}, std::vector<T>(out, T{0}));
  }

  Tensor<T> operator()(const Tensor<T>& x, ParamMode mode = ParamMode::kTrainable) const {
    return ad::conv2d(x, use(weight_, mode), use(bias_, mode), stride_, padding_);
  }

  int stride() const { return stride_; }

 private:
  int stride_ = 1;
  int padding_ = 0;
  Tensor<T> weight_;
  Tensor<T> bias_;
};

// ---------------------------------------------------------------- batching

/// Images (H x W x 3) -> constant tensor [B, 3, H, W].
template <typename T>
Tensor<T> images_to_tensor(const std::vector<Image>& images) {
  if (images.empty()) throw ShapeError("images_to_tensor: empty batch");
  const int h = images[0].height(), w = images[0].width(), c = images[0].channels();
  std::vector<T> v(images.size() * static_cast<std::size_t>(c) * h * w);
  std::size_t k = 0;
  for (const Image& img : images) {
    if (img.height() != h || img.width() != w || img.channels() != c)
      throw ShapeError("images_to_tensor: mixed image sizes");
    for (int ch = 0; ch < c; ++ch)
      for (int r = 0; r < h; ++r)
        for (int col = 0; col < w; ++col) v[k++] = static_cast<T>(img.at(r, col, ch));
  }
  return Tensor<T>::constant({static_cast<int>(images.size()), c, h, w}, std::move(v));
}

/// Binary maps -> constant tensor [B, 1, H, W] with values 0/1.
template <typename T>
Tensor<T> maps_to_tensor(const std::vector<BinaryMap>& maps) {
  if (maps.empty()) throw ShapeError("maps_to_tensor: empty batch");
  const int h = maps[0].height(), w = maps[0].width();
  std::vector<T> v;
  v.reserve(maps.size() * static_cast<std::size_t>(h) * w);
  for (const BinaryMap& m : maps) {
    if (m.height() != h || m.width() != w) throw ShapeError("maps_to_tensor: mixed sizes");
    for (std::uint8_t b : m.data()) v.push_back(b ? T{1} : T{0});
  }
  return Tensor<T>::constant({static_cast<int>(maps.size()), 1, h, w}, std::move(v));
}

/// [B, C, H, W] -> B images.
template <typename T>
std::vector<Image> tensor_to_images(const Tensor<T>& t) {
  if (t.rank() != 4) throw ShapeError("tensor_to_images: expected [B,C,H,W]");
  const int b = t.dim(0), c = t.dim(1), h = t.dim(2), w = t.dim(3);
  std::vector<Image> out;
  auto v = t.values();
  std::size_t k = 0;
  for (int i = 0; i < b; ++i) {
    Image img(h, w, c);
    for (int ch = 0; ch < c; ++ch)
      for (int r = 0; r < h; ++r)
        for (int col = 0; col < w; ++col) img.at(r, col, ch) = static_cast<float>(v[k++]);
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace symface::nn

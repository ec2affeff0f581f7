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

// Minimal reverse-mode differentiation over dense row-major tensors.
//
// A Tensor is a handle to a graph node. Operations (ops.hpp) create new
// nodes that remember their inputs when gradients are enabled and at least
// one input requires a gradient; otherwise the result is a detached
// constant. Graphs are owned by their outputs and are freed when the last
// handle goes away. A graph is confined to one thread; parameter leaves may
// be read concurrently by graphs built under NoGradGuard.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace symface::ad {

using Shape = std::vector<int>;

/// Vectorized kernels peel loops according to the buffer address, so the
/// rounding of a result depends on alignment. A fixed alignment keeps runs
/// bit-reproducible.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

std::int64_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

template <typename T>
struct Node {
  Shape shape;
  Buffer<T> value;
  Buffer<T> grad;  // lazily allocated
  bool requires_grad = false;
  const char* op = "leaf";
  std::string tag;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Buffer<T>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), T{0});
    return grad;
  }
};

/// True unless a NoGradGuard is alive on this thread.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
class Tensor {
 public:
  using NodePtr = std::shared_ptr<Node<T>>;

  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor constant(Shape shape, std::vector<T> values);
  static Tensor full(Shape shape, T value);
  static Tensor zeros(Shape shape) { return full(std::move(shape), T{0}); }
  static Tensor scalar(T value) { return full({}, value); }
  /// Trainable leaf; gradients accumulate across backward passes until zero_grad().
  static Tensor parameter(Shape shape, std::vector<T> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  /// Negative indices count from the back.
  int dim(int i) const;
  std::int64_t numel() const { return static_cast<std::int64_t>(node_->value.size()); }

  std::span<const T> values() const { return node_->value; }
  /// Writable view for leaves (optimizers, finite differences).
  std::span<T> mutable_values() { return node_->value; }
  std::span<const T> grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad() { node_->grad.clear(); }

  bool requires_grad() const { return node_->requires_grad; }
  T item() const;

  /// Backpropagates from this scalar into every reachable node.
  void backward() const;

  const Tensor& set_tag(std::string tag) const {
    node_->tag = std::move(tag);
    return *this;
  }
  const std::string& tag() const { return node_->tag; }
  const char* op() const { return node_->op; }

  Node<T>* node() const { return node_.get(); }
  const NodePtr& node_ptr() const { return node_; }

 private:
  NodePtr node_;
};

/// True when every value is finite.
template <typename T>
bool all_finite(const Tensor<T>& t);

}  // namespace symface::ad

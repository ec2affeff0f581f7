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

#include "symface/tensor.hpp"

#include <cmath>
#include <unordered_set>
#include <utility>

#include "symface/errors.hpp"

namespace symface::ad {
namespace {
thread_local bool g_grad_enabled = true;
}

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape " + to_string(shape));
    n *= d;
  }
  return n;
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
Tensor<T> Tensor<T>::constant(Shape shape, std::vector<T> values) {
  if (ad::numel(shape) != static_cast<std::int64_t>(values.size()))
    throw ShapeError("constant: " + std::to_string(values.size()) + " values for shape " +
                     to_string(shape));
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value.assign(values.begin(), values.end());
  n->op = "constant";
  return Tensor(std::move(n));
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value) {
  const auto count = static_cast<std::size_t>(ad::numel(shape));
  return constant(std::move(shape), std::vector<T>(count, value));
}

template <typename T>
Tensor<T> Tensor<T>::parameter(Shape shape, std::vector<T> values) {
  Tensor t = constant(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  t.node_->op = "parameter";
  return t;
}

template <typename T>
int Tensor<T>::dim(int i) const {
  const int r = rank();
  const int k = i < 0 ? r + i : i;
  if (k < 0 || k >= r) throw ShapeError("dim index out of range for " + to_string(shape()));
  return node_->shape[k];
}

template <typename T>
T Tensor<T>::item() const {
  if (node_->value.size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return node_->value[0];
}

template <typename T>
void Tensor<T>::backward() const {
  if (node_->value.size() != 1) throw ShapeError("backward() requires a scalar output");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS restricted to nodes that carry gradients.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node<T>* p = n->parents[next++].get();
      if (p && p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += T{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (!n->backward || n->grad.empty()) continue;
    n->backward(*n);
    // Interior gradients are consumed; only leaves keep theirs.
    Buffer<T>().swap(n->grad);
  }
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
  for (T v : t.values())
    if (!std::isfinite(v)) return false;
  return true;
}

template class Tensor<float>;
template class Tensor<double>;
template bool all_finite(const Tensor<float>&);
template bool all_finite(const Tensor<double>&);

}  // namespace symface::ad

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

#include "symface/optim.hpp"

#include <cmath>

#include "symface/errors.hpp"

namespace symface {

template <typename T>
Adam<T>::Adam(nn::ParameterSet<T>& params, AdamConfig config) : params_(&params), config_(config) {
  if (!(config_.lr >= 0) || !(config_.beta1 >= 0 && config_.beta1 < 1) || !(config_.beta2 >= 0 && config_.beta2 < 1) ||
      !(config_.epsilon > 0))
    throw ConfigError("Adam: need lr >= 0, betas in [0, 1), epsilon > 0");
  for (const auto& [_, p] : params.entries()) {
    m_.emplace_back(static_cast<std::size_t>(p.numel()), T{0});
    v_.emplace_back(static_cast<std::size_t>(p.numel()), T{0});
  }
}

template <typename T>
void Adam<T>::step() {
  auto& entries = params_->entries();
  if (entries.size() != m_.size()) throw IntegrityError("Adam: parameter set changed after construction");
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  const T b1 = static_cast<T>(config_.beta1), b2 = static_cast<T>(config_.beta2);
  const T lr = static_cast<T>(config_.lr), eps = static_cast<T>(config_.epsilon);
  const T ic1 = static_cast<T>(1.0 / c1), ic2 = static_cast<T>(1.0 / c2);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& p = entries[i].second;
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto w = p.mutable_values();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = b1 * m[k] + (T{1} - b1) * g[k];
      v[k] = b2 * v[k] + (T{1} - b2) * g[k] * g[k];
      const T mhat = m[k] * ic1;
      const T vhat = v[k] * ic2;
      w[k] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

template <typename T>
void Adam<T>::restore(std::int64_t steps, std::vector<std::vector<T>> m, std::vector<std::vector<T>> v) {
  if (m.size() != m_.size() || v.size() != v_.size()) throw IntegrityError("Adam: moment count mismatch");
  for (std::size_t i = 0; i < m_.size(); ++i)
    if (m[i].size() != m_[i].size() || v[i].size() != v_[i].size())
      throw IntegrityError("Adam: moment size mismatch for " + params_->entries()[i].first);
  t_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

template class Adam<float>;
template class Adam<double>;

}  // namespace symface

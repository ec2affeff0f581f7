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

#include <cstdint>
#include <string>
#include <vector>

#include "symface/nn.hpp"

namespace symface {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Plain Adam with bias correction. Parameters that received no gradient in
/// the last backward pass are left untouched (moments included).
template <typename T>
class Adam {
 public:
  Adam(nn::ParameterSet<T>& params, AdamConfig config);

  void step();
  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

  /// Moments in registration order, for checkpoints.
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }
  void restore(std::int64_t steps, std::vector<std::vector<T>> m, std::vector<std::vector<T>> v);

 private:
  nn::ParameterSet<T>* params_;
  AdamConfig config_;
  std::int64_t t_ = 0;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
};

}  // namespace symface

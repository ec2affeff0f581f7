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

#include <cstddef>
#include <functional>
#include <vector>

#include "symface/tensor.hpp"

namespace symface::ad {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::size_t components_checked = 0;
  /// Components left out because the stencil crossed a kink (skip_kinks).
  std::size_t components_skipped = 0;
};

/// Compares the reverse-mode gradient of a scalar function against
/// fourth-order central finite differences, component by component. The
/// relative error of a component is |a - n| / max(|a|, |n|, 1e-6).
/// `components` restricts the check to a subset of flat indices (empty = all).
/// With `skip_kinks`, a component is left out when any leaky_relu, abs or
/// clamp switches branch between the stencil points: finite differences are
/// not a valid reference there. Slower, since every evaluation builds a graph.
template <typename T>
GradCheckReport grad_check_report(const std::function<Tensor<T>(const Tensor<T>&)>& f,
                                  const Tensor<T>& x, double epsilon,
                                  const std::vector<std::size_t>& components = {}, bool skip_kinks = false);

/// Maximum relative error over all components of x.
template <typename T>
double grad_check(const std::function<Tensor<T>(const Tensor<T>&)>& f, const Tensor<T>& x,
                  double epsilon) {
  return grad_check_report<T>(f, x, epsilon).max_relative_error;
}

/// Same check for a trainable leaf that `loss` reads implicitly (a module
/// parameter). The parameter's values are perturbed in place and restored;
/// its gradient buffer is cleared before and after.
template <typename T>
GradCheckReport grad_check_parameter(const std::function<Tensor<T>()>& loss, Tensor<T> parameter,
                                     double epsilon, const std::vector<std::size_t>& components = {},
                                     bool skip_kinks = false);

}  // namespace symface::ad

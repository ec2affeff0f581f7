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

#include "symface/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string_view>
#include <unordered_set>

#include "symface/errors.hpp"

namespace symface::ad {
namespace {

void check_epsilon(double epsilon) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3))
    throw ParameterError("grad_check: epsilon must lie in [1e-7, 1e-3]");
}

template <typename T>
T evaluate(const std::function<Tensor<T>()>& f) {
  const Tensor<T> y = f();
  if (y.numel() != 1) throw ShapeError("grad_check: function must return a scalar");
  const T v = y.item();
  if (!std::isfinite(v)) throw NumericError("grad_check: non-finite function value");
  return v;
}

std::vector<std::size_t> resolve(const std::vector<std::size_t>& components, std::size_t n) {
  if (!components.empty()) {
    for (std::size_t i : components)
      if (i >= n) throw ParameterError("grad_check: component index out of range");
    return components;
  }
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return all;
}

// Which branch every non-smooth op took, in graph order.
template <typename T>
std::vector<bool> branch_pattern(const Tensor<T>& y) {
  std::vector<bool> out;
  std::unordered_set<const Node<T>*> seen;
  std::vector<const Node<T>*> stack{y.node()};
  while (!stack.empty()) {
    const Node<T>* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    const std::string_view op = n->op;
    if ((op == "leaky_relu" || op == "abs" || op == "clamp") && !n->parents.empty()) {
      const auto& in = n->parents.front()->value;
      for (std::size_t k = 0; k < in.size(); ++k)
        out.push_back(op == "clamp" ? in[k] == n->value[k] : in[k] > T(0));
    }
    for (const auto& p : n->parents)
      if (p) stack.push_back(p.get());
  }
  return out;
}

// Components smaller than this are compared in absolute terms; below it the
// finite-difference rounding noise dominates a true zero.
constexpr double kRelativeFloor = 1e-6;

void accumulate(GradCheckReport& report, std::size_t index, double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kRelativeFloor});
  const double rel = std::abs(analytic - numeric) / denom;
  ++report.components_checked;
  if (report.components_checked == 1 || rel > report.max_relative_error) {
    report.max_relative_error = rel;
    report.worst_index = index;
    report.analytic_at_worst = analytic;
    report.numeric_at_worst = numeric;
  }
}

}  // namespace

template <typename T>
GradCheckReport grad_check_parameter(const std::function<Tensor<T>()>& loss, Tensor<T> parameter,
                                     double epsilon, const std::vector<std::size_t>& components,
                                     bool skip_kinks) {
  check_epsilon(epsilon);
  if (!parameter.requires_grad()) throw ParameterError("grad_check_parameter: leaf takes no gradient");
  parameter.zero_grad();
  {
    const Tensor<T> y = loss();
    if (y.numel() != 1) throw ShapeError("grad_check: function must return a scalar");
    if (!std::isfinite(y.item())) throw NumericError("grad_check: non-finite function value");
    y.backward();
  }
  std::vector<T> analytic(parameter.grad().begin(), parameter.grad().end());
  if (analytic.empty()) analytic.assign(parameter.numel(), T{0});
  parameter.zero_grad();

  GradCheckReport report;
  auto values = parameter.mutable_values();
  std::vector<bool> base;
  if (skip_kinks) base = branch_pattern(loss());
  for (std::size_t i : resolve(components, values.size())) {
    const T saved = values[i];
    if (skip_kinks) {
      bool crosses = false;
      for (double offset : {-2 * epsilon, -epsilon, epsilon, 2 * epsilon}) {
        values[i] = saved + static_cast<T>(offset);
        crosses = crosses || branch_pattern(loss()) != base;
      }
      values[i] = saved;
      if (crosses) {
        ++report.components_skipped;
        continue;
      }
    }
    NoGradGuard no_grad;
    auto at = [&](double offset) {
      values[i] = saved + static_cast<T>(offset);
      return static_cast<double>(evaluate<T>(loss));
    };
    // Fourth-order central stencil: truncation error O(eps^4), so a larger
    // step can be used and rounding noise in f matters less.
    const double numeric =
        (-at(2 * epsilon) + 8 * at(epsilon) - 8 * at(-epsilon) + at(-2 * epsilon)) / (12.0 * epsilon);
    values[i] = saved;
    accumulate(report, i, static_cast<double>(analytic[i]), numeric);
  }
  return report;
}

template <typename T>
GradCheckReport grad_check_report(const std::function<Tensor<T>(const Tensor<T>&)>& f,
                                  const Tensor<T>& x, double epsilon,
                                  const std::vector<std::size_t>& components, bool skip_kinks) {
  Tensor<T> leaf = Tensor<T>::parameter(x.shape(), std::vector<T>(x.values().begin(), x.values().end()));
  return grad_check_parameter<T>([&]() { return f(leaf); }, leaf, epsilon, components, skip_kinks);
}

template GradCheckReport grad_check_report<float>(const std::function<Tensor<float>(const Tensor<float>&)>&,
                                                  const Tensor<float>&, double,
                                                  const std::vector<std::size_t>&, bool);
template GradCheckReport grad_check_report<double>(
    const std::function<Tensor<double>(const Tensor<double>&)>&, const Tensor<double>&, double,
    const std::vector<std::size_t>&, bool);
template GradCheckReport grad_check_parameter<float>(const std::function<Tensor<float>()>&, Tensor<float>,
                                                     double, const std::vector<std::size_t>&, bool);
template GradCheckReport grad_check_parameter<double>(const std::function<Tensor<double>()>&,
                                                      Tensor<double>, double,
                                                      const std::vector<std::size_t>&, bool);

}  // namespace symface::ad

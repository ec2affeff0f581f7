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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "symface/errors.hpp"
#include "symface/gradcheck.hpp"
#include "symface/ops.hpp"
#include "test_util.hpp"

namespace symface::ad {
namespace {

using symface::testing::random_parameter;
using symface::testing::random_tensor;
using Fn = std::function<Tensor<double>(const Tensor<double>&)>;

constexpr double kTol = 1e-5;
constexpr double kEps = 1e-4;

double check(const Fn& f, Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  return grad_check<double>(f, random_parameter<double>(std::move(shape), seed, lo, hi), kEps);
}

// Weighted sum so that every output element gets a distinct upstream gradient.
Tensor<double> probe(const Tensor<double>& y) {
  return sum(mul(y, random_tensor<double>(y.shape(), 99)));
}

TEST(GradCheck, Elementwise) {
  const auto other = random_tensor<double>({3, 4}, 7);
  EXPECT_LT(check([&](const auto& x) { return probe(add(x, other)); }, {3, 4}, 1), kTol);
  EXPECT_LT(check([&](const auto& x) { return probe(sub(other, x)); }, {3, 4}, 2), kTol);
  EXPECT_LT(check([&](const auto& x) { return probe(mul(x, x)); }, {3, 4}, 3), kTol);
  EXPECT_LT(check([](const auto& x) { return probe(scale(x, 2.5)); }, {5}, 4), kTol);
  EXPECT_LT(check([](const auto& x) { return probe(add_scalar(x, -1.0)); }, {5}, 5), kTol);
}

TEST(GradCheck, Broadcasting) {
  const auto row = random_tensor<double>({1, 4}, 8);
  EXPECT_LT(check([&](const auto& x) { return probe(mul(x, row)); }, {3, 4}, 1), kTol);
  const auto full = random_tensor<double>({2, 3, 4}, 9);
  EXPECT_LT(check([&](const auto& x) { return probe(add(full, x)); }, {3, 1}, 2), kTol);
}

TEST(GradCheck, Nonlinearities) {
  EXPECT_LT(check([](const auto& x) { return probe(gelu(x)); }, {10}, 1, -3, 3), kTol);
  EXPECT_LT(check([](const auto& x) { return probe(sigmoid(x)); }, {10}, 2, -3, 3), kTol);
  EXPECT_LT(check([](const auto& x) { return probe(tanh(x)); }, {10}, 3, -3, 3), kTol);
  EXPECT_LT(check([](const auto& x) { return probe(log(x)); }, {10}, 4, 0.2, 3), kTol);
  EXPECT_LT(check([](const auto& x) { return probe(square(x)); }, {10}, 5), kTol);
  // Kinks are avoided by sampling away from zero.
  EXPECT_LT(check([](const auto& x) { return probe(abs(x)); }, {10}, 6, 0.1, 1), kTol);
  EXPECT_LT(check([](const auto& x) { return probe(abs(x)); }, {10}, 7, -1, -0.1), kTol);
  EXPECT_LT(check([](const auto& x) { return probe(leaky_relu(x, 0.2)); }, {10}, 8, 0.1, 1), kTol);
  EXPECT_LT(check([](const auto& x) { return probe(leaky_relu(x, 0.2)); }, {10}, 9, -1, -0.1), kTol);
}

TEST(GradCheck, SkipKinksLeavesOutOnlyStraddlingComponents) {
  // Components 1 and 3 sit within the stencil of a kink; 0 and 2 do not.
  const auto x = Tensor<double>::constant({4}, {0.5, 2e-6, -0.7, -1e-6});
  auto f = [](const Tensor<double>& v) { return sum(add(leaky_relu(v, 0.2), abs(v))); };
  const auto plain = grad_check_report<double>(f, x, 1e-5);
  EXPECT_GT(plain.max_relative_error, 0.1);
  EXPECT_EQ(plain.components_skipped, 0u);
  const auto aware = grad_check_report<double>(f, x, 1e-5, {}, true);
  EXPECT_EQ(aware.components_checked, 2u);
  EXPECT_EQ(aware.components_skipped, 2u);
  EXPECT_LT(aware.max_relative_error, 1e-8);
  // Smooth functions lose nothing.
  const auto smooth = grad_check_report<double>([](const Tensor<double>& v) { return sum(gelu(v)); }, x, 1e-5, {}, true);
  EXPECT_EQ(smooth.components_skipped, 0u);
  // clamp switches at its bounds, not at zero.
  const auto c = grad_check_report<double>(
      [](const Tensor<double>& v) { return sum(clamp(v, -0.7 + 1e-6, 1.0)); }, x, 1e-5, {}, true);
  EXPECT_EQ(c.components_skipped, 1u);
}

TEST(GradCheck, Reductions) {
  EXPECT_LT(check([](const auto& x) { return sum(x); }, {2, 3}, 1), kTol);
  EXPECT_LT(check([](const auto& x) { return mean(square(x)); }, {2, 3}, 2), kTol);
  EXPECT_LT(check([](const auto& x) { return probe(mean_trailing(x, 1)); }, {2, 3, 4}, 3), kTol);
}

TEST(GradCheck, LinearAlgebra) {
  const auto w = random_tensor<double>({4, 5}, 1);
  const auto b = random_tensor<double>({5}, 2);
  EXPECT_LT(check([&](const auto& x) { return probe(linear(x, w, b)); }, {2, 3, 4}, 3), kTol);
  const auto x = random_tensor<double>({2, 3, 4}, 4);
  EXPECT_LT(check([&](const auto& wp) { return probe(linear(x, wp, b)); }, {4, 5}, 5), kTol);
  EXPECT_LT(check([&](const auto& bp) { return probe(linear(x, w, bp)); }, {5}, 6), kTol);

  const auto a = random_tensor<double>({2, 3, 4}, 7);
  EXPECT_LT(check([&](const auto& m) { return probe(bmm(a, m, false)); }, {2, 4, 5}, 8), kTol);
  EXPECT_LT(check([&](const auto& m) { return probe(bmm(a, m, true)); }, {2, 5, 4}, 9), kTol);
  EXPECT_LT(check([&](const auto& m) { return probe(bmm(m, a, true)); }, {2, 6, 4}, 10), kTol);
}

TEST(GradCheck, Conv2d) {
  const auto w = random_tensor<double>({3, 2, 4, 4}, 1);
  const auto b = random_tensor<double>({3}, 2);
  const auto x = random_tensor<double>({2, 2, 8, 8}, 3);
  EXPECT_LT(check([&](const auto& xp) { return probe(conv2d(xp, w, b, 2, 1)); }, {2, 2, 8, 8}, 4), kTol);
  EXPECT_LT(check([&](const auto& wp) { return probe(conv2d(x, wp, b, 2, 1)); }, {3, 2, 4, 4}, 5), kTol);
  EXPECT_LT(check([&](const auto& bp) { return probe(conv2d(x, w, bp, 2, 1)); }, {3}, 6), kTol);
  const auto w3 = random_tensor<double>({2, 2, 3, 3}, 7);
  EXPECT_LT(check([&](const auto& xp) { return probe(conv2d(xp, w3, Tensor<double>(), 1, 1)); }, {1, 2, 5, 5}, 8),
            kTol);
}

TEST(GradCheck, Normalization) {
  const auto g = random_tensor<double>({6}, 1, 0.5, 1.5);
  const auto b = random_tensor<double>({6}, 2);
  const auto x = random_tensor<double>({3, 6}, 3);
  EXPECT_LT(check([&](const auto& xp) { return probe(layer_norm(xp, g, b)); }, {3, 6}, 4), kTol);
  EXPECT_LT(check([&](const auto& gp) { return probe(layer_norm(x, gp, b)); }, {6}, 5), kTol);
  EXPECT_LT(check([&](const auto& bp) { return probe(layer_norm(x, g, bp)); }, {6}, 6), kTol);
  EXPECT_LT(check([](const auto& xp) { return probe(softmax(xp)); }, {3, 5}, 7, -2, 2), kTol);
}

TEST(GradCheck, Layout) {
  EXPECT_LT(check([](const auto& x) { return probe(reshape(x, {6, 2})); }, {3, 4}, 1), kTol);
  EXPECT_LT(check([](const auto& x) { return probe(permute(x, {2, 0, 1})); }, {2, 3, 4}, 2), kTol);
  const auto other = random_tensor<double>({2, 2, 4}, 3);
  EXPECT_LT(check([&](const auto& x) { return probe(concat<double>({x, other}, 1)); }, {2, 3, 4}, 4), kTol);
  EXPECT_LT(check([](const auto& x) { return probe(select(x, 1)); }, {3, 4}, 5), kTol);
  EXPECT_LT(check([](const auto& x) { return probe(roll2d(x, 1, -2)); }, {1, 4, 4, 2}, 6), kTol);
  EXPECT_LT(check([](const auto& x) { return probe(window_partition(x, 2)); }, {1, 4, 4, 2}, 7), kTol);
  EXPECT_LT(check([](const auto& x) { return probe(window_reverse(x, 2, 4, 4)); }, {4, 4, 2}, 8), kTol);
  auto idx = std::make_shared<std::vector<int>>(std::vector<int>{0, 0, 3, 1});
  EXPECT_LT(check([&](const auto& x) { return probe(gather(x, idx, {4})); }, {4}, 9), kTol);
}

TEST(Ops, BroadcastValues) {
  const auto a = Tensor<double>::constant({2, 1}, {1, 2});
  const auto b = Tensor<double>::constant({1, 3}, {10, 20, 30});
  const auto c = add(a, b);
  ASSERT_EQ(c.shape(), (Shape{2, 3}));
  EXPECT_EQ(std::vector<double>(c.values().begin(), c.values().end()),
            (std::vector<double>{11, 21, 31, 12, 22, 32}));
}

TEST(Ops, SoftmaxMasksNegativeInfinity) {
  const double inf = std::numeric_limits<double>::infinity();
  const auto s = softmax(Tensor<double>::constant({1, 3}, {0.0, -inf, 0.0}));
  EXPECT_DOUBLE_EQ(s.values()[0], 0.5);
  EXPECT_EQ(s.values()[1], 0.0);
  EXPECT_DOUBLE_EQ(s.values()[2], 0.5);
}

TEST(Ops, Conv2dMatchesDirectSum) {
  const auto x = random_tensor<double>({2, 3, 7, 6}, 1);
  const auto w = random_tensor<double>({4, 3, 3, 3}, 2);
  const auto b = random_tensor<double>({4}, 3);
  const int stride = 2, pad = 1;
  const auto y = conv2d(x, w, b, stride, pad);
  ASSERT_EQ(y.shape(), (Shape{2, 4, 4, 3}));
  auto X = [&](int n, int c, int h, int ww) { return x.values()[((n * 3 + c) * 7 + h) * 6 + ww]; };
  auto W = [&](int o, int c, int i, int j) { return w.values()[((o * 3 + c) * 3 + i) * 3 + j]; };
  for (int n = 0; n < 2; ++n)
    for (int o = 0; o < 4; ++o)
      for (int oh = 0; oh < 4; ++oh)
        for (int ow = 0; ow < 3; ++ow) {
          double s = b.values()[o];
          for (int c = 0; c < 3; ++c)
            for (int i = 0; i < 3; ++i)
              for (int j = 0; j < 3; ++j) {
                const int ih = oh * stride - pad + i, iw = ow * stride - pad + j;
                if (ih >= 0 && ih < 7 && iw >= 0 && iw < 6) s += X(n, c, ih, iw) * W(o, c, i, j);
              }
          EXPECT_NEAR(y.values()[((n * 4 + o) * 4 + oh) * 3 + ow], s, 1e-12);
        }
}

TEST(Ops, WindowPartitionRoundTrip) {
  const auto x = random_tensor<double>({2, 8, 8, 3}, 4);
  const auto back = window_reverse(window_partition(x, 4), 4, 8, 8);
  EXPECT_TRUE(std::equal(x.values().begin(), x.values().end(), back.values().begin()));
  const auto rolled = roll2d(roll2d(x, 3, -2), -3, 2);
  EXPECT_TRUE(std::equal(x.values().begin(), x.values().end(), rolled.values().begin()));
}

TEST(Ops, StopGradientBlocksFlow) {
  auto p = random_parameter<double>({4}, 1);
  auto loss = sum(mul(stop_gradient(p), p));
  loss.backward();
  ASSERT_TRUE(p.has_grad());
  // d/dp of sg(p) * p is sg(p) = p, not 2p.
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(p.grad()[i], p.values()[i]);
}

TEST(Ops, NoGradGuardRecordsNothing) {
  auto p = random_parameter<double>({4}, 1);
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    auto y = sum(square(p));
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_TRUE(grad_enabled());
}

TEST(Ops, GradientsAccumulateUntilCleared) {
  auto p = random_parameter<double>({3}, 1);
  sum(p).backward();
  sum(p).backward();
  for (double g : p.grad()) EXPECT_DOUBLE_EQ(g, 2.0);
  p.zero_grad();
  EXPECT_FALSE(p.has_grad());
}

TEST(Ops, ShapeErrors) {
  EXPECT_THROW(add(Tensor<double>::zeros({2, 3}), Tensor<double>::zeros({3, 2})), symface::ShapeError);
  EXPECT_THROW(reshape(Tensor<double>::zeros({2, 3}), {4}), symface::ShapeError);
  EXPECT_THROW(bmm(Tensor<double>::zeros({1, 2, 3}), Tensor<double>::zeros({1, 2, 3}), false), symface::ShapeError);
  EXPECT_THROW(Tensor<double>::zeros({2}).item(), symface::ShapeError);
}

TEST(GradCheckHarness, DetectsAWrongGradient) {
  // A function whose recorded graph disagrees with its values: the value is
  // x^2 but the gradient path only sees x.
  const Fn wrong = [](const Tensor<double>& x) { return sum(add(x, sub(square(stop_gradient(x)), x))); };
  const Fn right = [](const Tensor<double>& x) { return sum(square(x)); };
  EXPECT_GT(check(wrong, {4}, 1, 0.5, 1.0), 0.1);
  EXPECT_LT(check(right, {4}, 1, 0.5, 1.0), kTol);
}

}  // namespace
}  // namespace symface::ad

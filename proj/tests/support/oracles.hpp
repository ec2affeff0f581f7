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

// Independent reference implementations used by the unit and acceptance
// tests. None of them reuse library code paths beyond reading parameters.

#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "symface/nn.hpp"

namespace symface::oracle {

inline int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

/// Dense attention over all tokens of x [1, H, W, C] (row-major tokens).
/// Token pairs whose shifted window keys differ are masked out; the
/// relative-position bias is read by coordinate difference. Parameters come
/// from `params` under `<prefix>.qkv`, `<prefix>.proj`, `<prefix>.rel_bias`.
template <typename T>
std::vector<double> dense_window_attention(const nn::ParameterSet<T>& params, const std::string& prefix,
                                           const std::vector<double>& x, int H, int W, int C, int heads, int window,
                                           int shift) {
  const auto& qkv_w = *params.find(prefix + ".qkv.weight");
  const auto& qkv_b = *params.find(prefix + ".qkv.bias");
  const auto& proj_w = *params.find(prefix + ".proj.weight");
  const auto& proj_b = *params.find(prefix + ".proj.bias");
  const auto& table = *params.find(prefix + ".rel_bias");
  const int N = H * W, d = C / heads, span = 2 * window - 1;

  std::vector<double> qkv(static_cast<std::size_t>(N) * 3 * C);
  for (int t = 0; t < N; ++t)
    for (int o = 0; o < 3 * C; ++o) {
      double s = qkv_b.values()[o];
      for (int i = 0; i < C; ++i) s += x[t * C + i] * double(qkv_w.values()[i * 3 * C + o]);
      qkv[t * 3 * C + o] = s;
    }
  auto q = [&](int t, int h, int e) { return qkv[t * 3 * C + h * d + e]; };
  auto k = [&](int t, int h, int e) { return qkv[t * 3 * C + C + h * d + e]; };
  auto v = [&](int t, int h, int e) { return qkv[t * 3 * C + 2 * C + h * d + e]; };

  std::vector<double> merged(static_cast<std::size_t>(N) * C, 0.0);
  for (int i = 0; i < N; ++i) {
    const int ri = i / W, ci = i % W;
    for (int h = 0; h < heads; ++h) {
      std::vector<double> score(N, -std::numeric_limits<double>::infinity());
      double peak = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < N; ++j) {
        const int rj = j / W, cj = j % W;
        if (floor_div(ri - shift, window) != floor_div(rj - shift, window) ||
            floor_div(ci - shift, window) != floor_div(cj - shift, window))
          continue;
        double s = 0.0;
        for (int e = 0; e < d; ++e) s += q(i, h, e) * k(j, h, e);
        s /= std::sqrt(static_cast<double>(d));
        const int idx = (ri - rj + window - 1) * span + (ci - cj + window - 1);
        s += table.values()[idx * heads + h];
        score[j] = s;
        peak = std::max(peak, s);
      }
      double z = 0.0;
      for (int j = 0; j < N; ++j)
        if (std::isfinite(score[j])) z += std::exp(score[j] - peak);
      for (int j = 0; j < N; ++j) {
        if (!std::isfinite(score[j])) continue;
        const double p = std::exp(score[j] - peak) / z;
        for (int e = 0; e < d; ++e) merged[i * C + h * d + e] += p * v(j, h, e);
      }
    }
  }
  std::vector<double> out(static_cast<std::size_t>(N) * C);
  for (int t = 0; t < N; ++t)
    for (int o = 0; o < C; ++o) {
      double s = proj_b.values()[o];
      for (int i = 0; i < C; ++i) s += merged[t * C + i] * double(proj_w.values()[i * C + o]);
      out[t * C + o] = s;
    }
  return out;
}

}  // namespace symface::oracle

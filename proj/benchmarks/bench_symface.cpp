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

#include <benchmark/benchmark.h>

#include "symface/generator.hpp"
#include "symface/metrics.hpp"
#include "symface/ops.hpp"
#include "symface/rng.hpp"
#include "symface/scs.hpp"
#include "symface/toyfaces.hpp"
#include "symface/trainer.hpp"

namespace symface {
namespace {

template <typename T>
ad::Tensor<T> filled(ad::Shape shape, std::uint64_t seed, bool trainable) {
  Rng rng(seed);
  std::vector<T> v(static_cast<std::size_t>(ad::numel(shape)));
  for (T& x : v) x = static_cast<T>(rng.uniform(-1.0, 1.0));
  return trainable ? ad::Tensor<T>::parameter(std::move(shape), std::move(v))
                   : ad::Tensor<T>::constant(std::move(shape), std::move(v));
}

// args: batch, channels, side
void BM_Conv2dForwardBackward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0)), c = static_cast<int>(state.range(1)),
            side = static_cast<int>(state.range(2));
  const auto x = filled<float>({n, c, side, side}, 1, true);
  const auto w = filled<float>({2 * c, c, 4, 4}, 2, true);
  const auto b = filled<float>({2 * c}, 3, true);
  for (auto _ : state) {
    auto y = ad::conv2d(x, w, b, 2, 1);
    ad::sum(y).backward();
    benchmark::DoNotOptimize(y.values().data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Conv2dForwardBackward)->Args({8, 3, 64})->Args({8, 16, 32})->Args({8, 64, 8})->Unit(benchmark::kMillisecond);

void BM_GeneratorForward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  Generator<float> g(SwinConfig{}, 1);
  const auto x = filled<float>({1, 3, side, side}, 4, false);
  const auto m = ad::Tensor<float>::zeros({1, 1, side, side});
  ad::NoGradGuard no_grad;
  for (auto _ : state) {
    auto y = g.forward(x, m);
    benchmark::DoNotOptimize(y.values().data());
  }
}
BENCHMARK(BM_GeneratorForward)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  TrainConfig config;
  config.batch_size = static_cast<int>(state.range(0));
  const auto data = generate_faces(1, config.batch_size, 64, 0.0);
  std::vector<const Sample*> batch;
  for (const auto& s : data) batch.push_back(&s);
  Trainer<float> trainer(config, 64);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.train_step(batch).total);
  state.SetItemsProcessed(state.iterations() * config.batch_size);
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

// arg: tile size K
void BM_HeatmapLocalFill(benchmark::State& state) {
  const Sample s = generate_face(3, 128, 0.0);
  const ScsRegions regions = scs_regions(s, ScsTarget::kEye);
  const Inpainter inp = Inpainter::local_fill(5);
  const int K = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(heatmap(inp, s, regions.held_out, K).max_value());
}
BENCHMARK(BM_HeatmapLocalFill)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

// args: rows, dims
void BM_FrechetDistance(benchmark::State& state) {
  const auto rows = static_cast<Eigen::Index>(state.range(0)), dims = static_cast<Eigen::Index>(state.range(1));
  Rng rng(5);
  Eigen::MatrixXd a(rows, dims), b(rows, dims);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a.data()[i] = rng.normal();
    b.data()[i] = rng.normal() + 0.1;
  }
  for (auto _ : state) benchmark::DoNotOptimize(frechet_distance(a, b));
}
BENCHMARK(BM_FrechetDistance)->Args({1000, 64})->Args({10000, 8})->Args({2000, 192});

}  // namespace
}  // namespace symface

BENCHMARK_MAIN();

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
#include <fstream>

#include "symface/checkpoint.hpp"
#include "symface/errors.hpp"
#include "symface/ops.hpp"
#include "symface/optim.hpp"
#include "test_util.hpp"

namespace symface {
namespace {

using ad::Tensor;
using testing::TempDir;

// Plain double-precision Adam for a single coordinate.
struct ScalarAdam {
  double m = 0, v = 0, w;
  int t = 0;
  void step(double g, const AdamConfig& c) {
    ++t;
    m = c.beta1 * m + (1 - c.beta1) * g;
    v = c.beta2 * v + (1 - c.beta2) * g * g;
    const double mh = m / (1 - std::pow(c.beta1, t));
    const double vh = v / (1 - std::pow(c.beta2, t));
    w -= c.lr * mh / (std::sqrt(vh) + c.epsilon);
  }
};

TEST(Adam, MatchesScalarReference) {
  nn::ParameterSet<double> params;
  Tensor<double> p = params.add("w", {3}, {0.5, -1.0, 2.0});
  const AdamConfig cfg{0.01, 0.8, 0.95, 1e-8};
  Adam<double> opt(params, cfg);
  std::vector<ScalarAdam> ref = {{0, 0, 0.5}, {0, 0, -1.0}, {0, 0, 2.0}};
  const std::vector<double> coef = {1.5, -0.25, 3.0};
  for (int it = 0; it < 5; ++it) {
    params.zero_grad();
    // loss = sum(coef * w^2); grad = 2 coef w
    auto c = Tensor<double>::constant({3}, coef);
    ad::sum(ad::mul(c, ad::square(p))).backward();
    for (int k = 0; k < 3; ++k) ref[k].step(2 * coef[k] * ref[k].w, cfg);
    opt.step();
  }
  EXPECT_EQ(opt.steps(), 5);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(p.values()[k], ref[k].w, 1e-12);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  nn::ParameterSet<double> params;
  Tensor<double> p = params.add("w", {2}, {1.0, 1.0});
  Adam<double> opt(params, {0.1, 0.9, 0.999, 1e-12});
  ad::sum(ad::mul(Tensor<double>::constant({2}, {4.0, -0.001}), p)).backward();
  opt.step();
  EXPECT_NEAR(p.values()[0], 0.9, 1e-9);
  EXPECT_NEAR(p.values()[1], 1.1, 1e-6);
}

TEST(Adam, SkipsParametersWithoutGradient) {
  nn::ParameterSet<float> params;
  Tensor<float> a = params.add("a", {1}, {1.0f});
  Tensor<float> b = params.add("b", {1}, {1.0f});
  Adam<float> opt(params, {});
  ad::sum(a).backward();
  opt.step();
  EXPECT_LT(a.values()[0], 1.0f);
  EXPECT_EQ(b.values()[0], 1.0f);
  EXPECT_EQ(opt.second_moments()[1][0], 0.0f);
}

TEST(Adam, RejectsBadConfig) {
  nn::ParameterSet<float> params;
  params.add("a", {1}, {1.0f});
  EXPECT_THROW(Adam<float>(params, {0.1, 1.0, 0.999, 1e-8}), ConfigError);
  EXPECT_THROW(Adam<float>(params, {-0.1, 0.9, 0.999, 1e-8}), ConfigError);
  EXPECT_THROW(Adam<float>(params, {0.1, 0.9, 0.999, 0.0}), ConfigError);
}

TEST(Adam, RestoreChecksSizes) {
  nn::ParameterSet<float> params;
  params.add("a", {2}, {1.0f, 2.0f});
  Adam<float> opt(params, {});
  EXPECT_THROW(opt.restore(1, {{0.0f}}, {{0.0f}}), IntegrityError);
  EXPECT_THROW(opt.restore(1, {{0.0f, 0.0f}, {0.0f}}, {{0.0f, 0.0f}}), IntegrityError);
  opt.restore(7, {{0.5f, 0.25f}}, {{1.0f, 2.0f}});
  EXPECT_EQ(opt.steps(), 7);
  EXPECT_EQ(opt.first_moments()[0][1], 0.25f);
}

Checkpoint sample_checkpoint(DType dtype) {
  Checkpoint c;
  c.dtype = dtype;
  c.swin.embed_dim = 8;
  c.disc.layers = 2;
  c.state_json = R"({"step":12,"note":"x"})";
  c.arrays.push_back({"a", {2, 3}, {0.1, -0.2, 0.3, 1e-7, 5.0, -6.5}});
  c.arrays.push_back({"b", {1}, {42.0}});
  return c;
}

TEST(Checkpoint, RoundTripF64IsExact) {
  TempDir dir;
  const Checkpoint c = sample_checkpoint(DType::kF64);
  save_checkpoint(dir / "c.bin", c);
  const Checkpoint r = load_checkpoint(dir / "c.bin");
  EXPECT_EQ(r.dtype, DType::kF64);
  EXPECT_TRUE(r.swin == c.swin);
  EXPECT_TRUE(r.disc == c.disc);
  ASSERT_EQ(r.arrays.size(), 2u);
  EXPECT_EQ(r.at("a").shape, (std::vector<int>{2, 3}));
  EXPECT_EQ(r.at("a").values, c.arrays[0].values);
  EXPECT_EQ(r.at("b").values[0], 42.0);
  EXPECT_FALSE(std::filesystem::exists(dir / "c.bin.tmp"));
}

TEST(Checkpoint, RoundTripF32RoundsToFloat) {
  TempDir dir;
  const Checkpoint c = sample_checkpoint(DType::kF32);
  save_checkpoint(dir / "c.bin", c);
  const Checkpoint r = load_checkpoint(dir / "c.bin");
  for (std::size_t i = 0; i < c.arrays[0].values.size(); ++i)
    EXPECT_EQ(r.at("a").values[i], static_cast<double>(static_cast<float>(c.arrays[0].values[i])));
  // 8 magic + 4 version + 8 length + header + 7 floats
  {
    std::ifstream is(dir / "c.bin", std::ios::binary);
    is.seekg(12);
    std::uint64_t len = 0;
    is.read(reinterpret_cast<char*>(&len), 8);
    EXPECT_EQ(std::filesystem::file_size(dir / "c.bin"), 20 + len + 7 * sizeof(float));
  }
}

TEST(Checkpoint, MissingArrayIsIntegrityError) {
  const Checkpoint c = sample_checkpoint(DType::kF32);
  EXPECT_EQ(c.find("zzz"), nullptr);
  EXPECT_THROW(c.at("zzz"), IntegrityError);
}

TEST(Checkpoint, ShapeValueMismatchRefusedOnSave) {
  TempDir dir;
  Checkpoint c = sample_checkpoint(DType::kF32);
  c.arrays[1].shape = {2};
  EXPECT_THROW(save_checkpoint(dir / "c.bin", c), ShapeError);
}

std::string read_all(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

void write_all(const std::filesystem::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

TEST(Checkpoint, CorruptFilesAreFormatErrors) {
  TempDir dir;
  save_checkpoint(dir / "c.bin", sample_checkpoint(DType::kF32));
  const std::string good = read_all(dir / "c.bin");

  std::string bad = good;
  bad[0] = 'X';
  write_all(dir / "magic.bin", bad);
  EXPECT_THROW(load_checkpoint(dir / "magic.bin"), FormatError);

  bad = good;
  bad[8] = 9;  // format_version
  write_all(dir / "version.bin", bad);
  EXPECT_THROW(load_checkpoint(dir / "version.bin"), FormatError);

  write_all(dir / "trailing.bin", good + "x");
  EXPECT_THROW(load_checkpoint(dir / "trailing.bin"), FormatError);

  write_all(dir / "short.bin", good.substr(0, good.size() - 3));
  EXPECT_THROW(load_checkpoint(dir / "short.bin"), FormatError);

  bad = good;
  bad[20] = '[';  // header JSON
  write_all(dir / "json.bin", bad);
  EXPECT_THROW(load_checkpoint(dir / "json.bin"), FormatError);

  EXPECT_THROW(load_checkpoint(dir / "absent.bin"), IoError);
}

TEST(Checkpoint, RestoreParametersChecksShape) {
  nn::ParameterSet<float> src;
  src.add("w", {2, 2}, {1, 2, 3, 4});
  Checkpoint c;
  append_parameters(c, src);

  nn::ParameterSet<float> same;
  Tensor<float> w = same.add("w", {2, 2}, {0, 0, 0, 0});
  restore_parameters(c, same);
  EXPECT_EQ(w.values()[3], 4.0f);

  nn::ParameterSet<float> other;
  other.add("w", {4}, {0, 0, 0, 0});
  EXPECT_THROW(restore_parameters(c, other), IntegrityError);

  nn::ParameterSet<float> missing;
  missing.add("v", {1}, {0});
  EXPECT_THROW(restore_parameters(c, missing), IntegrityError);
}

TEST(Checkpoint, GeneratorRoundTripReproducesOutput) {
  SwinConfig cfg;
  cfg.patch_size = 2;
  cfg.embed_dim = 8;
  cfg.depths = {2, 2};
  cfg.heads = {1, 2};
  cfg.window_size = 2;
  cfg.mlp_ratio = 2;
  Generator<float> g(cfg, 5);
  Checkpoint c;
  c.swin = cfg;
  append_parameters(c, g.params());
  TempDir dir;
  save_checkpoint(dir / "g.bin", c);
  Generator<float> back = load_generator<float>(load_checkpoint(dir / "g.bin"));
  const auto x = testing::random_tensor<float>({1, 3, 8, 8}, 3, 0, 1);
  std::vector<float> mv(64, 0.0f);
  for (int i = 18; i < 30; ++i) mv[i] = 1.0f;
  const auto m = Tensor<float>::constant({1, 1, 8, 8}, mv);
  const auto a = g.forward(x, m), b = back.forward(x, m);
  for (std::int64_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a.values()[i], b.values()[i]);
}

}  // namespace
}  // namespace symface

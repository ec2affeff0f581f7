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

#include "symface/errors.hpp"
#include "symface/toyfaces.hpp"
#include "symface/trainer.hpp"
#include "test_util.hpp"

namespace symface {
namespace {

using testing::TempDir;

TrainConfig tiny_config() {
  TrainConfig c;
  c.batch_size = 2;
  c.max_steps = 3;
  c.seed = 11;
  c.swin.patch_size = 4;
  c.swin.embed_dim = 8;
  c.swin.depths = {2, 2};
  c.swin.heads = {1, 2};
  c.swin.window_size = 4;
  c.swin.mlp_ratio = 2;
  c.disc.layers = 2;
  c.disc.base_channels = 4;
  c.disc.max_multiplier = 2;
  return c;
}

std::string expect_config_error(const std::string& text) {
  try {
    parse_train_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  ADD_FAILURE() << "no ConfigError for: " << text;
  return {};
}

TEST(TrainConfig, ParsesKeysCommentsAndLists) {
  const TrainConfig c = parse_train_config(
      "# run\n"
      "generator_lr = 0.002\n"
      "  batch_size=4   # trailing\n"
      "\n"
      "depths = 2, 2\n"
      "heads = 1,2\n"
      "omega_eye = 7\n"
      "pixel_norm = l2\n"
      "mask_preset = wide\n"
      "segmenter = external:./seg.sh\n"
      "precision = f64\n");
  EXPECT_DOUBLE_EQ(c.generator_lr, 0.002);
  EXPECT_EQ(c.batch_size, 4);
  EXPECT_EQ(c.swin.depths, (std::vector<int>{2, 2}));
  EXPECT_EQ(c.swin.heads, (std::vector<int>{1, 2}));
  EXPECT_DOUBLE_EQ(c.weights.omega[static_cast<std::size_t>(
                       std::find(kFaceParts.begin(), kFaceParts.end(), Part::kEye) - kFaceParts.begin())],
                   7.0);
  EXPECT_EQ(c.mask_preset, MaskKind::kWide);
  EXPECT_EQ(c.precision, "f64");
  EXPECT_EQ(c.segmenter, "external:./seg.sh");
}

TEST(TrainConfig, DefaultsMatchDocumentedValues) {
  const TrainConfig c = parse_train_config("");
  EXPECT_DOUBLE_EQ(c.generator_lr, 1e-3);
  EXPECT_DOUBLE_EQ(c.discriminator_lr, 1e-4);
  EXPECT_EQ(c.batch_size, 8);
  EXPECT_EQ(c.mask_preset, MaskKind::kAggressive);
  EXPECT_EQ(c.precision, "f32");
  EXPECT_EQ(c.segmenter, "oracle");
}

TEST(TrainConfig, ErrorsNameTheKey) {
  EXPECT_NE(expect_config_error("learning_rate = 1").find("learning_rate"), std::string::npos);
  EXPECT_NE(expect_config_error("batch_size = four").find("batch_size"), std::string::npos);
  EXPECT_NE(expect_config_error("batch_size = 0").find("batch_size"), std::string::npos);
  EXPECT_NE(expect_config_error("precision = f16").find("precision"), std::string::npos);
  EXPECT_NE(expect_config_error("mask_preset = huge").find("mask_preset"), std::string::npos);
  EXPECT_NE(expect_config_error("segmenter = magic").find("segmenter"), std::string::npos);
  EXPECT_NE(expect_config_error("depths = 2,x").find("depths"), std::string::npos);
  EXPECT_NE(expect_config_error("just words").find("line 1"), std::string::npos);
  expect_config_error("generator_lr = -1");
  expect_config_error("checkpoint_interval = -2");
}

TEST(TrainConfig, TextRoundTrip) {
  TrainConfig c = tiny_config();
  c.generator_lr = 0.1 + 0.2;  // not exactly representable in short decimal
  c.weights.omega[2] = 1.0 / 3.0;
  c.weights.perceptual_weight = 0.5;
  c.mask_preset = MaskKind::kNarrow;
  const TrainConfig r = parse_train_config(to_config_text(c));
  EXPECT_EQ(r.generator_lr, c.generator_lr);
  EXPECT_EQ(r.weights.omega, c.weights.omega);
  EXPECT_EQ(r.weights.perceptual_weight, c.weights.perceptual_weight);
  EXPECT_EQ(r.mask_preset, c.mask_preset);
  EXPECT_TRUE(r.swin == c.swin);
  EXPECT_TRUE(r.disc == c.disc);
  EXPECT_EQ(to_config_text(r), to_config_text(c));
}

TEST(TrainConfig, LoadMissingFileIsIoError) {
  TempDir dir;
  EXPECT_THROW(load_train_config(dir / "none.cfg"), IoError);
}

TEST(Schedule, StepMasksAreDeterministicPerSlot) {
  const TrainConfig c = tiny_config();
  const auto a = step_masks(c, 5, 3, 32);
  const auto b = step_masks(c, 5, 3, 32);
  ASSERT_EQ(a.size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_TRUE(a[i].grid == b[i].grid);
  // slot i does not depend on the batch size
  const auto longer = step_masks(c, 5, 5, 32);
  for (int i = 0; i < 3; ++i) EXPECT_TRUE(a[i].grid == longer[i].grid);
  const auto next = step_masks(c, 6, 3, 32);
  EXPECT_FALSE(a[0].grid == next[0].grid);
}

TEST(Schedule, EpochOrderIsAPermutation) {
  for (int epoch = 0; epoch < 5; ++epoch) {
    auto order = epoch_order(3, epoch, 17);
    EXPECT_EQ(order, epoch_order(3, epoch, 17));
    std::sort(order.begin(), order.end());
    for (int i = 0; i < 17; ++i) EXPECT_EQ(order[i], i);
  }
  EXPECT_NE(epoch_order(3, 0, 17), epoch_order(3, 1, 17));
  EXPECT_NE(epoch_order(3, 0, 17), epoch_order(4, 0, 17));
}

TEST(Schedule, PlannedSteps) {
  TrainConfig c = tiny_config();
  EXPECT_EQ(planned_steps(c, 10), 3);
  c.max_steps = 0;
  c.epochs = 2;
  c.batch_size = 4;
  EXPECT_EQ(planned_steps(c, 10), 6);  // ceil(10/4) per epoch
}

TEST(Trainer, RejectsBadImageSide) { EXPECT_THROW(Trainer<float>(tiny_config(), 36), ShapeError); }

TEST(Trainer, StepIsDeterministicAndChangesParameters) {
  const auto data = generate_faces(1, 2, 32, 0.0);
  std::vector<const Sample*> batch = {&data[0], &data[1]};
  Trainer<float> a(tiny_config(), 32), b(tiny_config(), 32);
  const auto before = a.generator().params().flatten();
  const LossReport ra = a.train_step(batch);
  const LossReport rb = b.train_step(batch);
  EXPECT_EQ(ra.total, rb.total);
  EXPECT_EQ(ra.discriminator_total, rb.discriminator_total);
  EXPECT_TRUE(std::isfinite(ra.total));
  EXPECT_EQ(a.generator().params().flatten(), b.generator().params().flatten());
  EXPECT_NE(a.generator().params().flatten(), before);
  EXPECT_EQ(a.steps_done(), 1);
}

TEST(Trainer, StepRejectsEmptyOrMismatchedBatch) {
  Trainer<float> t(tiny_config(), 32);
  EXPECT_THROW(t.train_step({}), ConfigError);
  const auto big = generate_faces(1, 1, 48, 0.0);
  EXPECT_THROW(t.train_step({&big[0]}), ShapeError);
}

std::vector<NamedArray> arrays_of(const std::filesystem::path& p) { return load_checkpoint(p).arrays; }

TEST(Trainer, ResumeMatchesUninterruptedRun) {
  const auto data = generate_faces(2, 3, 32, 0.1);
  TrainConfig c = tiny_config();
  c.max_steps = 4;  // crosses an epoch boundary (2 steps per epoch)
  TempDir full, part;
  const TrainSummary s = train(data, c, {full.path(), std::nullopt, {}});
  EXPECT_EQ(s.steps, 4);
  EXPECT_EQ(s.reports.size(), 4u);

  TrainConfig half = c;
  half.max_steps = 2;
  train(data, half, {part.path(), std::nullopt, {}});
  const TrainSummary rest = train(data, c, {part.path(), part / "last.bin", {}});
  EXPECT_EQ(rest.reports.size(), 2u);

  const auto x = arrays_of(full / "last.bin"), y = arrays_of(part / "last.bin");
  ASSERT_EQ(x.size(), y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(x[i].name, y[i].name);
    EXPECT_EQ(x[i].values, y[i].values) << x[i].name;
  }
  EXPECT_EQ(s.reports[3].total, rest.reports[1].total);

  // both logs hold a header plus four rows
  auto lines = [](const std::filesystem::path& p) {
    std::ifstream is(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(is, l);) out.push_back(l);
    return out;
  };
  const auto la = lines(full / "log.csv"), lb = lines(part / "log.csv");
  ASSERT_EQ(la.size(), 5u);
  EXPECT_EQ(la, lb);
  EXPECT_EQ(la[0].rfind("step,", 0), 0u);
}

TEST(Trainer, WritesPeriodicCheckpoints) {
  const auto data = generate_faces(2, 2, 32, 0.0);
  TrainConfig c = tiny_config();
  c.max_steps = 2;
  c.checkpoint_interval = 1;
  TempDir dir;
  int calls = 0;
  train(data, c, {dir.path(), std::nullopt, [&](std::int64_t, const LossReport&) { ++calls; }});
  EXPECT_EQ(calls, 2);
  EXPECT_TRUE(std::filesystem::exists(dir / "ckpt_000001.bin"));
  EXPECT_TRUE(std::filesystem::exists(dir / "ckpt_000002.bin"));
  EXPECT_TRUE(std::filesystem::exists(dir / "last.bin"));
}

TEST(Trainer, RestoreRejectsOtherArchitectureOrPrecision) {
  Trainer<float> t(tiny_config(), 32);
  const Checkpoint ck = t.to_checkpoint();
  TrainConfig wider = tiny_config();
  wider.swin.embed_dim = 16;
  Trainer<float> w(wider, 32);
  EXPECT_THROW(w.restore(ck), IntegrityError);
  Trainer<double> d(tiny_config(), 32);
  EXPECT_THROW(d.restore(ck), IntegrityError);
  Trainer<float> bigger(tiny_config(), 64);
  EXPECT_THROW(bigger.restore(ck), IntegrityError);
}

TEST(Trainer, EmptyDatasetIsConfigError) {
  TempDir dir;
  EXPECT_THROW(train({}, tiny_config(), {dir.path(), std::nullopt, {}}), ConfigError);
}

TEST(Trainer, F64RunProducesF64Checkpoint) {
  const auto data = generate_faces(4, 2, 32, 0.0);
  TrainConfig c = tiny_config();
  c.max_steps = 1;
  c.precision = "f64";
  TempDir dir;
  const TrainSummary s = train(data, c, {dir.path(), std::nullopt, {}});
  EXPECT_EQ(load_checkpoint(s.final_checkpoint).dtype, DType::kF64);
}

}  // namespace
}  // namespace symface

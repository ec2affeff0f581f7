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

// GAN training loop: one generator against the patch critic and six part
// critics. Everything random in a step is derived from (seed, step, slot),
// so a run is reproducible from its config and resumable from the step
// count alone.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "symface/checkpoint.hpp"
#include "symface/discriminators.hpp"
#include "symface/generator.hpp"
#include "symface/losses.hpp"
#include "symface/masking.hpp"
#include "symface/optim.hpp"
#include "symface/segmentation.hpp"

namespace symface {

struct TrainConfig {
  double generator_lr = 1e-3;
  double discriminator_lr = 1e-4;
  int batch_size = 8;
  int epochs = 1;
  /// 0 = run `epochs` full epochs; otherwise stop after this many steps.
  std::int64_t max_steps = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  LossWeights weights;
  MaskKind mask_preset = MaskKind::kAggressive;
  std::uint64_t seed = 0;
  /// Steps between checkpoints; 0 = only the final one.
  std::int64_t checkpoint_interval = 0;
  /// "f32" or "f64".
  std::string precision = "f32";
  /// "oracle" or "external:<command>".
  std::string segmenter = "oracle";
  SwinConfig swin;
  DiscConfig disc;

  void validate() const;
};

/// Flat `key = value` lines; '#' starts a comment. Unknown keys and bad
/// values throw ConfigError naming the key.
TrainConfig parse_train_config(const std::string& text);
TrainConfig load_train_config(const std::filesystem::path& path);
std::string to_config_text(const TrainConfig& config);

/// Masks for one step: slot i uses Rng::derive(seed, {step, i}).
std::vector<Mask> step_masks(const TrainConfig& config, std::int64_t step, int count, int size);

/// Visiting order of dataset indices for one epoch.
std::vector<int> epoch_order(std::uint64_t seed, std::int64_t epoch, int count);

template <typename T>
class Trainer {
 public:
  Trainer(const TrainConfig& config, int image_size);
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  /// One step on an explicit batch. Discriminators are updated before the
  /// generator, both from gradients of the same backward pass.
  LossReport train_step(const std::vector<const Sample*>& batch);

  std::int64_t steps_done() const { return step_; }
  const TrainConfig& config() const { return config_; }
  int image_size() const { return size_; }

  Generator<T>& generator() { return generator_; }
  const Generator<T>& generator() const { return generator_; }
  DiscriminatorBank<T>& discriminators() { return discs_; }
  const DiscriminatorBank<T>& discriminators() const { return discs_; }

  Checkpoint to_checkpoint() const;
  /// Restores parameters, optimizer moments and the step counter.
  void restore(const Checkpoint& ckpt);

 private:
  TrainConfig config_;
  int size_;
  Segmenter segmenter_;
  Generator<T> generator_;
  DiscriminatorBank<T> discs_;
  nn::ParameterSet<T> disc_params_;  // aliases of every critic parameter
  Adam<T> gen_opt_;
  Adam<T> disc_opt_;
  std::unique_ptr<FeatureEncoder<T>> encoder_;
  std::int64_t step_ = 0;
};

struct TrainOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume;
  /// Called after every step (e.g. for progress output).
  std::function<void(std::int64_t step, const LossReport&)> on_step;
};

struct TrainSummary {
  std::int64_t steps = 0;
  std::filesystem::path final_checkpoint;
  std::filesystem::path log;
  std::vector<LossReport> reports;  // steps run in this call
};

/// Epoch loop over `dataset` with seeded shuffling. Writes log.csv (one row
/// per step), ckpt_NNNNNN.bin every checkpoint_interval steps and last.bin.
TrainSummary train(const std::vector<Sample>& dataset, const TrainConfig& config, const TrainOptions& options);

/// Steps needed for the configured run on `count` samples.
std::int64_t planned_steps(const TrainConfig& config, int count);

}  // namespace symface

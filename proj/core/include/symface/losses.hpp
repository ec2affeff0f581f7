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

// Training objectives. Gradient routing between the generator and the
// critics is done with stop_gradient / ParamMode::kFrozen:
//   L_D sees the fake image detached, so it never reaches the generator;
//   L_G and feature matching run the critic with frozen parameters, so
//   they never reach the critic.
// Ground truth plays "real", the generator output plays "fake".

#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "symface/discriminators.hpp"
#include "symface/nn.hpp"
#include "symface/toyfaces.hpp"

namespace symface {

enum class PixelNorm { kL1, kL2 };

std::string_view pixel_norm_name(PixelNorm norm);
PixelNorm pixel_norm_from_name(std::string_view name);

struct LossWeights {
  double alpha = 10.0;   // pixel
  double beta = 10.0;    // patch adversarial
  double gamma = 100.0;  // patch feature matching
  double delta = 20.0;   // homogeneity
  /// Per face part, in kFaceParts order (skin, eye, hair, lip, cloth, ear).
  std::array<double, 6> omega = {0.083, 0.25, 0.083, 0.25, 0.083, 0.25};
  double perceptual_weight = 0.0;
  PixelNorm pixel_norm = PixelNorm::kL1;

  double omega_for(Part part) const { return omega[face_part_index(part)]; }
  /// Throws ConfigError on negative weights.
  void validate() const;
};

/// Scalar components of the generator objective.
struct LossTerms {
  double pixel = 0.0;
  double adversarial = 0.0;
  double feature_matching = 0.0;
  double homogeneity = 0.0;
  double perceptual = 0.0;
};

/// alpha*pixel + beta*adversarial + gamma*fm + delta*homogeneity + perceptual_weight*perceptual.
double combine(const LossTerms& terms, const LossWeights& weights);

struct LossReport {
  double pixel = 0.0;
  double adv_g = 0.0;  // patch critic, generator side
  double fm = 0.0;     // patch critic
  double perceptual = 0.0;
  std::array<double, 6> part{};  // part losses (adv_g + fm on the semantic critic)
  std::array<bool, 6> part_skipped{};
  double homogeneity = 0.0;
  std::array<double, 7> adv_d{};  // critic losses, patch first then kFaceParts order
  double total = 0.0;              // generator objective
  double discriminator_total = 0.0;

  LossTerms terms() const { return {pixel, adv_g, fm, homogeneity, perceptual}; }
  /// Column names matching to_csv_row (after the step column).
  static std::vector<std::string> csv_columns();
  std::vector<double> csv_values() const;
};

template <typename T>
ad::Tensor<T> pixel_wise(const ad::Tensor<T>& x, const ad::Tensor<T>& xhat, PixelNorm norm);

/// Probabilities sigmoid(logit) clamped to [1e-6, 1 - 1e-6].
template <typename T>
ad::Tensor<T> clamped_probability(const ad::Tensor<T>& logits);

template <typename T>
struct CriticLosses {
  ad::Tensor<T> d;   // L_D: critic objective
  ad::Tensor<T> g;   // L_G: generator-side adversarial term
  ad::Tensor<T> fm;  // feature matching
};

/// One pass over a critic: real forward (trainable), detached fake forward
/// (trainable) and fake forward with frozen critic parameters. Each loss is
/// an expectation over batch items weighted by `item_weights` (summing to 1;
/// empty = uniform) and over logit / feature positions within an item.
template <typename T>
CriticLosses<T> critic_losses(const Critic<T>& critic, const ad::Tensor<T>& real, const ad::Tensor<T>& fake,
                              const std::vector<double>& item_weights = {});

/// (L_D, L_G) for one critic.
template <typename T>
std::pair<ad::Tensor<T>, ad::Tensor<T>> adversarial_pair(const Critic<T>& critic, const ad::Tensor<T>& real,
                                                          const ad::Tensor<T>& fake);

/// From logits directly; throws NumericError on non-finite logits.
template <typename T>
std::pair<ad::Tensor<T>, ad::Tensor<T>> adversarial_from_logits(const ad::Tensor<T>& real_logits,
                                                                 const ad::Tensor<T>& fake_logits_detached,
                                                                 const ad::Tensor<T>& fake_logits_frozen);

/// Sum over layers of mean |f - g|; f (ground-truth features) is detached.
template <typename T>
ad::Tensor<T> feature_matching(const Critic<T>& critic, const ad::Tensor<T>& x, const ad::Tensor<T>& xhat);
template <typename T>
ad::Tensor<T> feature_matching_from_features(const std::vector<ad::Tensor<T>>& real,
                                             const std::vector<ad::Tensor<T>>& fake);

/// Frozen feature pyramid for the perceptual loss and perceptual metrics.
/// Implementations hold constants, never parameters, so no gradient can
/// reach them.
template <typename T>
class FeatureEncoder {
 public:
  virtual ~FeatureEncoder() = default;
  /// image [B, 3, H, W] -> one tensor per stage, leading dim B.
  virtual std::vector<ad::Tensor<T>> stages(const ad::Tensor<T>& image) const = 0;
};

/// Single stage returning its input.
template <typename T>
class IdentityEncoder final : public FeatureEncoder<T> {
 public:
  std::vector<ad::Tensor<T>> stages(const ad::Tensor<T>& image) const override { return {image}; }
};

/// Fixed random 3x3 stride-2 convolutions with leaky-ReLU.
template <typename T>
class RandomConvEncoder final : public FeatureEncoder<T> {
 public:
  RandomConvEncoder(std::uint64_t seed, std::vector<int> channels = {16, 32, 64});
  std::vector<ad::Tensor<T>> stages(const ad::Tensor<T>& image) const override;

 private:
  std::vector<ad::Tensor<T>> weights_;
  std::vector<ad::Tensor<T>> biases_;
};

template <typename T>
ad::Tensor<T> perceptual(const FeatureEncoder<T>& encoder, const ad::Tensor<T>& x, const ad::Tensor<T>& xhat);

template <typename T>
struct PartLoss {
  ad::Tensor<T> value;  // zero scalar when skipped
  bool skipped = false;
  ad::Tensor<T> d;      // the part critic's own L_D (zero when skipped)
};

/// x, xhat [B, 3, H, W]; part_mask [B, 1, H, W]. Items whose mask is empty
/// are dropped from every expectation; all empty -> skipped.
template <typename T>
PartLoss<T> part_loss(Part part, const ad::Tensor<T>& x, const ad::Tensor<T>& xhat, const ad::Tensor<T>& part_mask,
                      const SemanticDiscriminator<T>& critic);

/// Per-part [B, 1, H, W] mask tensors (kFaceParts order) for a batch.
template <typename T>
std::array<ad::Tensor<T>, 6> part_mask_tensors(const std::vector<PartMaskSet>& parts);

/// sum_p omega_p * part_p, skipped parts contributing exactly 0.
template <typename T>
ad::Tensor<T> homogeneity(const std::array<PartLoss<T>, 6>& parts, const std::array<double, 6>& omega);

template <typename T>
struct Objective {
  ad::Tensor<T> generator;      // weighted total
  ad::Tensor<T> discriminator;  // sum of the seven L_D
  LossReport report;
};

/// Full objective for one batch. x = ground truth, xhat = generator output.
/// `encoder` may be null when perceptual_weight is 0.
template <typename T>
Objective<T> total(const ad::Tensor<T>& x, const ad::Tensor<T>& xhat, const std::array<ad::Tensor<T>, 6>& part_masks,
                   const DiscriminatorBank<T>& discs, const LossWeights& weights,
                   const FeatureEncoder<T>* encoder = nullptr);

}  // namespace symface

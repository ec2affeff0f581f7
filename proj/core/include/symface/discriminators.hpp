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

// Convolutional critics. The patch discriminator scores every receptive
// field; the semantic discriminator pools to one logit per (masked) part
// image. Both expose their intermediate activations for feature matching.

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "symface/nn.hpp"
#include "symface/toyfaces.hpp"

namespace symface {

struct DiscConfig {
  int layers = 4;
  int base_channels = 32;
  /// Channel width stops doubling at base_channels * max_multiplier.
  int max_multiplier = 4;
  int kernel = 4;
  double leaky_slope = 0.2;

  int channels(int layer) const;
  void validate() const;
  bool operator==(const DiscConfig&) const = default;
};

template <typename T>
struct CriticOutput {
  ad::Tensor<T> logits;  // patch: [B, 1, H/2^L, W/2^L]; semantic: [B, 1]
  std::vector<ad::Tensor<T>> features;  // after each strided block, shallow first
};

template <typename T>
class Critic {
 public:
  virtual ~Critic() = default;
  /// image [B, 3, H, W]. kFrozen stops gradients at the critic's parameters
  /// while still letting them flow to the image.
  virtual CriticOutput<T> forward(const ad::Tensor<T>& image, nn::ParamMode mode) const = 0;
  virtual nn::ParameterSet<T>& params() = 0;
  virtual const nn::ParameterSet<T>& params() const = 0;
};

template <typename T>
class ConvStack {
 public:
  ConvStack() = default;
  ConvStack(nn::ParameterSet<T>& params, const std::string& name, const DiscConfig& config, Rng& rng);

  std::vector<ad::Tensor<T>> operator()(const ad::Tensor<T>& image, nn::ParamMode mode) const;

 private:
  DiscConfig config_;
  std::vector<nn::Conv2d<T>> convs_;
};

template <typename T>
class PatchDiscriminator final : public Critic<T> {
 public:
  PatchDiscriminator(const DiscConfig& config, std::uint64_t seed, const std::string& name = "disc.patch");

  CriticOutput<T> forward(const ad::Tensor<T>& image, nn::ParamMode mode) const override;
  nn::ParameterSet<T>& params() override { return params_; }
  const nn::ParameterSet<T>& params() const override { return params_; }

 private:
  DiscConfig config_;
  nn::ParameterSet<T> params_;
  ConvStack<T> stack_;
  nn::Conv2d<T> head_;
};

template <typename T>
class SemanticDiscriminator final : public Critic<T> {
 public:
  SemanticDiscriminator(const DiscConfig& config, std::uint64_t seed, const std::string& name);

  CriticOutput<T> forward(const ad::Tensor<T>& image, nn::ParamMode mode) const override;
  nn::ParameterSet<T>& params() override { return params_; }
  const nn::ParameterSet<T>& params() const override { return params_; }

 private:
  DiscConfig config_;
  nn::ParameterSet<T> params_;
  ConvStack<T> stack_;
  nn::Linear<T> head_;
};

/// The patch critic plus one semantic critic per face part, each seeded
/// independently. The part critics draw from `part_seed` (default: seed).
template <typename T>
struct DiscriminatorBank {
  DiscriminatorBank(const DiscConfig& config, std::uint64_t seed, std::optional<std::uint64_t> part_seed = {});

  std::unique_ptr<PatchDiscriminator<T>> patch;
  std::array<std::unique_ptr<SemanticDiscriminator<T>>, 6> parts;  // kFaceParts order

  SemanticDiscriminator<T>& part(Part p);
  const SemanticDiscriminator<T>& part(Part p) const;
  /// All seven critics, patch first.
  std::vector<Critic<T>*> all();
  std::vector<const Critic<T>*> all() const;
};

/// Index of a face part in kFaceParts; throws ParameterError for background.
int face_part_index(Part p);

/// image [B, 3, H, W] times mask [B, 1, H, W], broadcast over channels.
template <typename T>
ad::Tensor<T> extract_part(const ad::Tensor<T>& image, const ad::Tensor<T>& mask);

/// Single-image form.
Image extract_part(const Image& image, const BinaryMap& mask);

}  // namespace symface

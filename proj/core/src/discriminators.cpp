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

#include "symface/discriminators.hpp"

#include <algorithm>

#include "symface/errors.hpp"

namespace symface {

using ad::Tensor;

int DiscConfig::channels(int layer) const {
  return base_channels * std::min(1 << layer, max_multiplier);
}

void DiscConfig::validate() const {
  if (layers < 1 || base_channels < 1 || max_multiplier < 1 || kernel < 2 || kernel % 2 != 0)
    throw ConfigError("DiscConfig: layers, channels >= 1 and an even kernel >= 2 required");
  if (leaky_slope < 0) throw ConfigError("DiscConfig: leaky slope must be >= 0");
}

template <typename T>
ConvStack<T>::ConvStack(nn::ParameterSet<T>& params, const std::string& name, const DiscConfig& config, Rng& rng)
    : config_(config) {
  config_.validate();
  int in = 3;
  // kernel k, stride 2, padding k/2 - 1 halves the side exactly.
  for (int l = 0; l < config_.layers; ++l) {
    const int out = config_.channels(l);
    convs_.emplace_back(params, name + ".conv" + std::to_string(l), in, out, config_.kernel, 2, config_.kernel / 2 - 1,
                        rng, config_.leaky_slope);
    in = out;
  }
}

template <typename T>
std::vector<Tensor<T>> ConvStack<T>::operator()(const Tensor<T>& image, nn::ParamMode mode) const {
  if (image.rank() != 4 || image.dim(1) != 3) throw ShapeError("discriminator: image must be [B,3,H,W]");
  const int need = 1 << config_.layers;
  if (image.dim(2) % need != 0 || image.dim(3) % need != 0)
    throw ShapeError("discriminator: side must be a positive multiple of " + std::to_string(need) + " for " +
                     std::to_string(config_.layers) + " stride-2 layers");
  std::vector<Tensor<T>> features;
  Tensor<T> x = image;
  for (const auto& conv : convs_) {
    x = ad::leaky_relu(conv(x, mode), static_cast<T>(config_.leaky_slope));
    features.push_back(x);
  }
  return features;
}

template <typename T>
PatchDiscriminator<T>::PatchDiscriminator(const DiscConfig& config, std::uint64_t seed, const std::string& name)
    : config_(config) {
  Rng rng(seed);
  stack_ = ConvStack<T>(params_, name, config_, rng);
  head_ = nn::Conv2d<T>(params_, name + ".head", config_.channels(config_.layers - 1), 1, 1, 1, 0, rng, 1.0);
}

template <typename T>
CriticOutput<T> PatchDiscriminator<T>::forward(const Tensor<T>& image, nn::ParamMode mode) const {
  CriticOutput<T> out;
  out.features = stack_(image, mode);
  out.logits = head_(out.features.back(), mode);
  return out;
}

template <typename T>
SemanticDiscriminator<T>::SemanticDiscriminator(const DiscConfig& config, std::uint64_t seed,
                                                const std::string& name)
    : config_(config) {
  Rng rng(seed);
  stack_ = ConvStack<T>(params_, name, config_, rng);
  head_ = nn::Linear<T>(params_, name + ".head", config_.channels(config_.layers - 1), 1, rng);
}

template <typename T>
CriticOutput<T> SemanticDiscriminator<T>::forward(const Tensor<T>& image, nn::ParamMode mode) const {
  CriticOutput<T> out;
  out.features = stack_(image, mode);
  Tensor<T> pooled = ad::mean_trailing(out.features.back(), 2);  // [B, C]
  out.logits = head_(pooled, mode);                              // [B, 1]
  return out;
}

int face_part_index(Part p) {
  for (int i = 0; i < static_cast<int>(kFaceParts.size()); ++i)
    if (kFaceParts[i] == p) return i;
  throw ParameterError("no semantic discriminator for part '" + std::string(part_name(p)) + "'");
}

template <typename T>
DiscriminatorBank<T>::DiscriminatorBank(const DiscConfig& config, std::uint64_t seed,
                                        std::optional<std::uint64_t> part_seed) {
  patch = std::make_unique<PatchDiscriminator<T>>(config, Rng::derive(seed, {0x70u}).next_u64());
  for (std::size_t i = 0; i < kFaceParts.size(); ++i)
    parts[i] = std::make_unique<SemanticDiscriminator<T>>(
        config, Rng::derive(part_seed.value_or(seed), {0x71u, i}).next_u64(), "disc.part." + std::string(part_name(kFaceParts[i])));
}

template <typename T>
SemanticDiscriminator<T>& DiscriminatorBank<T>::part(Part p) {
  return *parts[face_part_index(p)];
}

template <typename T>
const SemanticDiscriminator<T>& DiscriminatorBank<T>::part(Part p) const {
  return *parts[face_part_index(p)];
}

template <typename T>
std::vector<Critic<T>*> DiscriminatorBank<T>::all() {
  std::vector<Critic<T>*> out{patch.get()};
  for (auto& d : parts) out.push_back(d.get());
  return out;
}

template <typename T>
std::vector<const Critic<T>*> DiscriminatorBank<T>::all() const {
  std::vector<const Critic<T>*> out{patch.get()};
  for (const auto& d : parts) out.push_back(d.get());
  return out;
}

template <typename T>
Tensor<T> extract_part(const Tensor<T>& image, const Tensor<T>& mask) {
  if (image.rank() != 4 || mask.rank() != 4 || mask.dim(1) != 1 || image.dim(0) != mask.dim(0) ||
      image.dim(2) != mask.dim(2) || image.dim(3) != mask.dim(3))
    throw ShapeError("extract_part: image " + ad::to_string(image.shape()) + " vs mask " + ad::to_string(mask.shape()));
  return ad::mul(image, mask);
}

Image extract_part(const Image& image, const BinaryMap& mask) {
  if (image.height() != mask.height() || image.width() != mask.width())
    throw ShapeError("extract_part: image and mask differ in size");
  Image out = image;
  for (int r = 0; r < image.height(); ++r)
    for (int c = 0; c < image.width(); ++c)
      if (!mask(r, c))
        for (int ch = 0; ch < image.channels(); ++ch) out.at(r, c, ch) = 0.0f;
  return out;
}

template class ConvStack<float>;
template class ConvStack<double>;
template class PatchDiscriminator<float>;
template class PatchDiscriminator<double>;
template class SemanticDiscriminator<float>;
template class SemanticDiscriminator<double>;
template struct DiscriminatorBank<float>;
template struct DiscriminatorBank<double>;
template Tensor<float> extract_part<float>(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> extract_part<double>(const Tensor<double>&, const Tensor<double>&);

}  // namespace symface

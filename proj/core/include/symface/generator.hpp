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

// Swin-Unet style inpainting generator. The decoder only ever sees the
// bottleneck: there are no encoder-to-decoder skip tensors, and audit_graph
// checks that on the recorded autodiff graph.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "symface/grid.hpp"
#include "symface/nn.hpp"

namespace symface {

struct SwinConfig {
  int patch_size = 4;
  int embed_dim = 32;
  std::vector<int> depths = {2, 2, 2};
  std::vector<int> heads = {2, 4, 4};
  int window_size = 4;
  int mlp_ratio = 4;
  int input_channels = 4;
  int output_channels = 3;

  int stages() const { return static_cast<int>(depths.size()); }
  int stage_dim(int stage) const { return embed_dim << stage; }

  /// Structural checks (list lengths, head divisibility, positive sizes).
  void validate() const;
  /// Throws ShapeError unless `side` tiles cleanly at every stage.
  void check_image_side(int side) const;

  bool operator==(const SwinConfig&) const = default;
};

std::string to_json(const SwinConfig& config);
SwinConfig swin_config_from_json(const std::string& text);

/// Window attention with a learned relative-position bias. Operates on
/// token grids [B, H, W, C].
template <typename T>
class WindowAttention {
 public:
  WindowAttention() = default;
  WindowAttention(nn::ParameterSet<T>& params, const std::string& name, int dim, int heads, int window,
                  Rng& rng);

  /// roll(-shift) -> partition -> masked attention -> reverse -> roll(+shift).
  /// The effective window is min(window, H); callers pass shift = 0 when the
  /// grid fits in one window.
  ad::Tensor<T> operator()(const ad::Tensor<T>& x, int shift, nn::ParamMode mode = nn::ParamMode::kTrainable) const;

  int heads() const { return heads_; }
  int window() const { return window_; }

 private:
  int dim_ = 0;
  int heads_ = 1;
  int window_ = 1;
  nn::Linear<T> qkv_;
  nn::Linear<T> proj_;
  ad::Tensor<T> rel_bias_;  // [(2w-1)^2, heads]
};

/// LN -> (shifted) window attention -> residual -> LN -> MLP(GELU) -> residual.
template <typename T>
class SwinBlock {
 public:
  SwinBlock() = default;
  SwinBlock(nn::ParameterSet<T>& params, const std::string& name, int dim, int heads, int window, int shift,
            int mlp_ratio, Rng& rng);

  /// Throws NumericError on non-finite output.
  ad::Tensor<T> operator()(const ad::Tensor<T>& x, nn::ParamMode mode = nn::ParamMode::kTrainable) const;

  const WindowAttention<T>& attention() const { return attn_; }
  int shift() const { return shift_; }

 private:
  int shift_ = 0;
  nn::LayerNorm<T> norm1_;
  WindowAttention<T> attn_;
  nn::LayerNorm<T> norm2_;
  nn::Linear<T> fc1_;
  nn::Linear<T> fc2_;
};

/// Additive attention bias [nW, N, N]: 0 inside a shifted window's region,
/// -inf across the cyclic wrap boundary. All zeros when shift = 0.
template <typename T>
ad::Tensor<T> shifted_window_mask(int height, int width, int window, int shift);

template <typename T>
class Generator {
 public:
  struct Output {
    ad::Tensor<T> image;       // [B, 3, H, W] in [0, 1]
    ad::Tensor<T> bottleneck;  // [B, h, w, C] deepest encoder tokens
  };

  Generator(const SwinConfig& config, std::uint64_t seed);
  Generator(const Generator&) = delete;
  Generator& operator=(const Generator&) = delete;
  Generator(Generator&&) = default;
  Generator& operator=(Generator&&) = default;

  /// image [B, 3, H, W], mask [B, 1, H, W] (1 = hole). Hole pixels of the
  /// image are zeroed here, so the network never sees their content.
  Output forward_detailed(const ad::Tensor<T>& image, const ad::Tensor<T>& mask) const;
  ad::Tensor<T> forward(const ad::Tensor<T>& image, const ad::Tensor<T>& mask) const {
    return forward_detailed(image, mask).image;
  }

  /// Gradient-free single-image inference. With `composite`, known pixels
  /// are copied back from the input.
  Image inpaint(const Image& image, const BinaryMap& mask, bool composite) const;

  const SwinConfig& config() const { return config_; }
  nn::ParameterSet<T>& params() { return params_; }
  const nn::ParameterSet<T>& params() const { return params_; }

  const SwinBlock<T>& block(int stage, int index, bool decoder) const;

 private:
  ad::Tensor<T> merge(int stage, const ad::Tensor<T>& x) const;
  ad::Tensor<T> expand(int stage, const ad::Tensor<T>& x) const;

  SwinConfig config_;
  nn::ParameterSet<T> params_;
  nn::Linear<T> embed_;
  nn::LayerNorm<T> embed_norm_;
  std::vector<std::vector<SwinBlock<T>>> encoder_;
  std::vector<nn::LayerNorm<T>> merge_norm_;
  std::vector<nn::Linear<T>> merge_proj_;
  std::vector<nn::Linear<T>> expand_proj_;
  std::vector<nn::LayerNorm<T>> expand_norm_;
  std::vector<std::vector<SwinBlock<T>>> decoder_;
  nn::LayerNorm<T> out_norm_;
  nn::Linear<T> unembed_;
};

/// Result of walking the autodiff graph behind a generator output.
struct GraphAudit {
  int merge_ops = 0;
  int expand_ops = 0;
  /// Concatenations reachable from the output without passing the bottleneck.
  int decoder_concats = 0;
  /// Encoder-side nodes (ancestors of the bottleneck other than parameters)
  /// reachable from the output without passing through the bottleneck.
  int skip_paths = 0;

  bool no_skip() const { return decoder_concats == 0 && skip_paths == 0; }
};

/// Nodes tagged "patch_merge"/"patch_expand" are counted; the graph must
/// have been recorded with gradients enabled.
template <typename T>
GraphAudit audit_graph(const ad::Tensor<T>& output, const ad::Tensor<T>& bottleneck);

}  // namespace symface

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

#include "symface/generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string_view>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "symface/errors.hpp"

namespace symface {

using ad::Shape;
using ad::Tensor;
using Index = std::shared_ptr<const std::vector<int>>;

// ---------------------------------------------------------------- config

void SwinConfig::validate() const {
  if (patch_size < 1 || embed_dim < 1 || window_size < 1 || mlp_ratio < 1 || input_channels < 1 ||
      output_channels < 1)
    throw ConfigError("SwinConfig: sizes must be positive");
  if (depths.empty() || depths.size() != heads.size())
    throw ConfigError("SwinConfig: depths and heads must be non-empty and of equal length");
  for (int s = 0; s < stages(); ++s) {
    if (depths[s] < 1 || heads[s] < 1) throw ConfigError("SwinConfig: depth and heads must be >= 1");
    if (stage_dim(s) % heads[s] != 0)
      throw ConfigError("SwinConfig: stage " + std::to_string(s) + " width " + std::to_string(stage_dim(s)) +
                        " is not divisible by " + std::to_string(heads[s]) + " heads");
  }
  if (input_channels != 4) throw ConfigError("SwinConfig: input_channels must be 4 (RGB + mask)");
}

void SwinConfig::check_image_side(int side) const {
  const int scale = patch_size << (stages() - 1);
  if (side <= 0 || side % scale != 0)
    throw ShapeError("image side " + std::to_string(side) + " is not a multiple of patch_size * 2^(stages-1) = " +
                     std::to_string(scale));
  for (int s = 0; s < stages(); ++s) {
    const int res = side / (patch_size << s);
    const int w = std::min(window_size, res);
    if (res % w != 0)
      throw ShapeError("stage " + std::to_string(s) + " grid " + std::to_string(res) + " is not divisible by window " +
                       std::to_string(w));
  }
}

std::string to_json(const SwinConfig& c) {
  nlohmann::json j = {{"patch_size", c.patch_size}, {"embed_dim", c.embed_dim},     {"depths", c.depths},
                      {"heads", c.heads},           {"window_size", c.window_size}, {"mlp_ratio", c.mlp_ratio},
                      {"input_channels", c.input_channels}, {"output_channels", c.output_channels}};
  return j.dump();
}

SwinConfig swin_config_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SwinConfig c;
    c.patch_size = j.at("patch_size").get<int>();
    c.embed_dim = j.at("embed_dim").get<int>();
    c.depths = j.at("depths").get<std::vector<int>>();
    c.heads = j.at("heads").get<std::vector<int>>();
    c.window_size = j.at("window_size").get<int>();
    c.mlp_ratio = j.at("mlp_ratio").get<int>();
    c.input_channels = j.at("input_channels").get<int>();
    c.output_channels = j.at("output_channels").get<int>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("SwinConfig: ") + e.what());
  }
}

// ---------------------------------------------------------------- attention

namespace {

int effective_window(int window, int h, int w) { return std::min({window, h, w}); }

// qkv [G, N, 3C] -> part (0 = q, 1 = k, 2 = v) as [G * heads, N, d].
Index split_heads_index(int g, int n, int c, int heads, int part) {
  const int d = c / heads;
  auto idx = std::make_shared<std::vector<int>>();
  idx->reserve(static_cast<std::size_t>(g) * n * c);
  for (int gi = 0; gi < g; ++gi)
    for (int h = 0; h < heads; ++h)
      for (int t = 0; t < n; ++t)
        for (int e = 0; e < d; ++e) idx->push_back(((gi * n + t) * 3 + part) * c + h * d + e);
  return idx;
}

// [G * heads, N, d] -> [G, N, C]
Index merge_heads_index(int g, int n, int c, int heads) {
  const int d = c / heads;
  auto idx = std::make_shared<std::vector<int>>();
  idx->reserve(static_cast<std::size_t>(g) * n * c);
  for (int gi = 0; gi < g; ++gi)
    for (int t = 0; t < n; ++t)
      for (int h = 0; h < heads; ++h)
        for (int e = 0; e < d; ++e) idx->push_back(((gi * heads + h) * n + t) * d + e);
  return idx;
}

// table [(2W-1)^2, heads] -> [heads, N, N] for an effective window ws <= W.
Index rel_bias_index(int table_window, int ws, int heads) {
  const int n = ws * ws, span = 2 * table_window - 1;
  auto idx = std::make_shared<std::vector<int>>();
  idx->reserve(static_cast<std::size_t>(heads) * n * n);
  for (int h = 0; h < heads; ++h)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const int dr = i / ws - j / ws + table_window - 1;
        const int dc = i % ws - j % ws + table_window - 1;
        idx->push_back((dr * span + dc) * heads + h);
      }
  return idx;
}

}  // namespace

template <typename T>
Tensor<T> shifted_window_mask(int height, int width, int window, int shift) {
  if (height % window != 0 || width % window != 0) throw ShapeError("shifted_window_mask: grid not divisible");
  const int nwh = height / window, nww = width / window, n = window * window;
  std::vector<T> v(static_cast<std::size_t>(nwh) * nww * n * n, T{0});
  if (shift > 0) {
    auto region = [&](int x, int extent) { return x < extent - window ? 0 : (x < extent - shift ? 1 : 2); };
    const T neg_inf = -std::numeric_limits<T>::infinity();
    for (int wr = 0; wr < nwh; ++wr)
      for (int wc = 0; wc < nww; ++wc) {
        const std::size_t base = static_cast<std::size_t>(wr * nww + wc) * n * n;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            const int ri = region(wr * window + i / window, height) * 3 + region(wc * window + i % window, width);
            const int rj = region(wr * window + j / window, height) * 3 + region(wc * window + j % window, width);
            if (ri != rj) v[base + i * n + j] = neg_inf;
          }
      }
  }
  return Tensor<T>::constant({nwh * nww, n, n}, std::move(v));
}

template <typename T>
WindowAttention<T>::WindowAttention(nn::ParameterSet<T>& params, const std::string& name, int dim, int heads,
                                    int window, Rng& rng)
    : dim_(dim), heads_(heads), window_(window) {
  qkv_ = nn::Linear<T>(params, name + ".qkv", dim, 3 * dim, rng);
  proj_ = nn::Linear<T>(params, name + ".proj", dim, dim, rng);
  const int span = 2 * window - 1;
  std::vector<T> table(static_cast<std::size_t>(span) * span * heads);
  for (T& t : table) t = static_cast<T>(rng.truncated_normal(0.02));
  rel_bias_ = params.add(name + ".rel_bias", {span * span, heads}, std::move(table));
}

template <typename T>
Tensor<T> WindowAttention<T>::operator()(const Tensor<T>& x, int shift, nn::ParamMode mode) const {
  if (x.rank() != 4 || x.dim(3) != dim_) throw ShapeError("window attention: expected [B,H,W," + std::to_string(dim_) + "]");
  const int b = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int ws = effective_window(window_, h, w);
  if (shift < 0 || shift >= ws) throw ParameterError("window attention: shift must be in [0, window)");
  const int nw = (h / ws) * (w / ws), n = ws * ws, g = b * nw, d = dim_ / heads_;

  Tensor<T> y = shift > 0 ? ad::roll2d(x, -shift, -shift) : x;
  Tensor<T> win = ad::window_partition(y, ws);
  Tensor<T> qkv = qkv_(win, mode);
  Tensor<T> q = ad::gather(qkv, split_heads_index(g, n, dim_, heads_, 0), {g * heads_, n, d}, "split_heads");
  Tensor<T> k = ad::gather(qkv, split_heads_index(g, n, dim_, heads_, 1), {g * heads_, n, d}, "split_heads");
  Tensor<T> v = ad::gather(qkv, split_heads_index(g, n, dim_, heads_, 2), {g * heads_, n, d}, "split_heads");

  Tensor<T> scores = ad::scale(ad::bmm(q, k, true), static_cast<T>(1.0 / std::sqrt(static_cast<double>(d))));
  scores = ad::reshape(scores, {b, nw, heads_, n, n});
  Tensor<T> rel = ad::gather(nn::use(rel_bias_, mode), rel_bias_index(window_, ws, heads_), {1, 1, heads_, n, n},
                             "rel_bias");
  scores = ad::add(scores, rel);
  if (shift > 0) scores = ad::add(scores, ad::reshape(shifted_window_mask<T>(h, w, ws, shift), {1, nw, 1, n, n}));
  Tensor<T> attn = ad::reshape(ad::softmax(scores), {g * heads_, n, n});

  Tensor<T> out = ad::bmm(attn, v, false);
  out = ad::gather(out, merge_heads_index(g, n, dim_, heads_), {g, n, dim_}, "merge_heads");
  out = proj_(out, mode);
  out = ad::window_reverse(out, ws, h, w);
  return shift > 0 ? ad::roll2d(out, shift, shift) : out;
}

template <typename T>
SwinBlock<T>::SwinBlock(nn::ParameterSet<T>& params, const std::string& name, int dim, int heads, int window,
                        int shift, int mlp_ratio, Rng& rng)
    : shift_(shift) {
  norm1_ = nn::LayerNorm<T>(params, name + ".norm1", dim);
  attn_ = WindowAttention<T>(params, name + ".attn", dim, heads, window, rng);
  norm2_ = nn::LayerNorm<T>(params, name + ".norm2", dim);
  fc1_ = nn::Linear<T>(params, name + ".mlp.fc1", dim, dim * mlp_ratio, rng);
  fc2_ = nn::Linear<T>(params, name + ".mlp.fc2", dim * mlp_ratio, dim, rng);
}

template <typename T>
Tensor<T> SwinBlock<T>::operator()(const Tensor<T>& x, nn::ParamMode mode) const {
  // A grid that fits in a single window has nothing to shift across.
  const bool fits = x.dim(1) <= attn_.window() && x.dim(2) <= attn_.window();
  const int shift = fits ? 0 : shift_;
  Tensor<T> y = ad::add(x, attn_(norm1_(x, mode), shift, mode));
  Tensor<T> out = ad::add(y, fc2_(ad::gelu(fc1_(norm2_(y, mode), mode)), mode));
  if (!ad::all_finite(out)) throw NumericError("swin block produced non-finite activations");
  return out;
}

// ---------------------------------------------------------------- generator

namespace {

// [B, C, H, W] -> [B, H/p, W/p, p*p*C], features ordered (row, col, channel).
Index patchify_index(int b, int c, int h, int w, int p) {
  auto idx = std::make_shared<std::vector<int>>();
  idx->reserve(static_cast<std::size_t>(b) * c * h * w);
  for (int bi = 0; bi < b; ++bi)
    for (int i = 0; i < h / p; ++i)
      for (int j = 0; j < w / p; ++j)
        for (int pr = 0; pr < p; ++pr)
          for (int pc = 0; pc < p; ++pc)
            for (int ch = 0; ch < c; ++ch) idx->push_back(((bi * c + ch) * h + i * p + pr) * w + j * p + pc);
  return idx;
}

// [B, h, w, p*p*C] -> [B, C, h*p, w*p]; inverse layout of patchify.
Index unpatchify_index(int b, int c, int h, int w, int p) {
  auto idx = std::make_shared<std::vector<int>>();
  const int f = p * p * c;
  idx->reserve(static_cast<std::size_t>(b) * f * h * w);
  for (int bi = 0; bi < b; ++bi)
    for (int ch = 0; ch < c; ++ch)
      for (int r = 0; r < h * p; ++r)
        for (int col = 0; col < w * p; ++col) {
          const int i = r / p, pr = r % p, j = col / p, pc = col % p;
          idx->push_back(((bi * h + i) * w + j) * f + (pr * p + pc) * c + ch);
        }
  return idx;
}

// [B, h, w, C] -> [B, h/2, w/2, 4C]
Index merge_index(int b, int h, int w, int c) {
  auto idx = std::make_shared<std::vector<int>>();
  idx->reserve(static_cast<std::size_t>(b) * h * w * c);
  for (int bi = 0; bi < b; ++bi)
    for (int i = 0; i < h / 2; ++i)
      for (int j = 0; j < w / 2; ++j)
        for (int q = 0; q < 4; ++q)
          for (int e = 0; e < c; ++e)
            idx->push_back(((bi * h + 2 * i + q / 2) * w + 2 * j + q % 2) * c + e);
  return idx;
}

// [B, h, w, 4C'] -> [B, 2h, 2w, C']
Index expand_index(int b, int h, int w, int c_out) {
  auto idx = std::make_shared<std::vector<int>>();
  idx->reserve(static_cast<std::size_t>(b) * h * w * 4 * c_out);
  for (int bi = 0; bi < b; ++bi)
    for (int r = 0; r < 2 * h; ++r)
      for (int col = 0; col < 2 * w; ++col)
        for (int e = 0; e < c_out; ++e)
          idx->push_back(((bi * h + r / 2) * w + col / 2) * 4 * c_out + ((r % 2) * 2 + col % 2) * c_out + e);
  return idx;
}

}  // namespace

template <typename T>
Generator<T>::Generator(const SwinConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng = Rng::derive(seed, {0x67656eu});
  const int p = config_.patch_size, stages = config_.stages();
  embed_ = nn::Linear<T>(params_, "gen.embed", p * p * config_.input_channels, config_.embed_dim, rng);
  embed_norm_ = nn::LayerNorm<T>(params_, "gen.embed_norm", config_.embed_dim);

  auto make_stage = [&](const std::string& prefix, int s) {
    std::vector<SwinBlock<T>> blocks;
    for (int k = 0; k < config_.depths[s]; ++k)
      blocks.emplace_back(params_, prefix + ".block" + std::to_string(k), config_.stage_dim(s), config_.heads[s],
                          config_.window_size, k % 2 ? config_.window_size / 2 : 0, config_.mlp_ratio, rng);
    return blocks;
  };
  for (int s = 0; s < stages; ++s) {
    encoder_.push_back(make_stage("gen.enc" + std::to_string(s), s));
    if (s + 1 < stages) {
      const int c = config_.stage_dim(s);
      const std::string name = "gen.merge" + std::to_string(s);
      merge_norm_.emplace_back(params_, name + ".norm", 4 * c);
      merge_proj_.emplace_back(params_, name + ".proj", 4 * c, 2 * c, rng, false);
    }
  }
  // Decoder stage s follows the expansion from stage s + 1.
  expand_proj_.resize(stages - 1);
  expand_norm_.resize(stages - 1);
  decoder_.resize(stages - 1);
  for (int s = stages - 2; s >= 0; --s) {
    const int c = config_.stage_dim(s);
    const std::string name = "gen.expand" + std::to_string(s);
    expand_proj_[s] = nn::Linear<T>(params_, name + ".proj", 2 * c, 4 * c, rng, false);
    expand_norm_[s] = nn::LayerNorm<T>(params_, name + ".norm", c);
    decoder_[s] = make_stage("gen.dec" + std::to_string(s), s);
  }
  out_norm_ = nn::LayerNorm<T>(params_, "gen.out_norm", config_.embed_dim);
  unembed_ = nn::Linear<T>(params_, "gen.unembed", config_.embed_dim, p * p * config_.output_channels, rng);
}

template <typename T>
Tensor<T> Generator<T>::merge(int stage, const Tensor<T>& x) const {
  const int b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  Tensor<T> y = ad::gather(x, merge_index(b, h, w, c), {b, h / 2, w / 2, 4 * c}, "merge_gather");
  y = merge_proj_[stage](merge_norm_[stage](y));
  y.set_tag("patch_merge");
  return y;
}

template <typename T>
Tensor<T> Generator<T>::expand(int stage, const Tensor<T>& x) const {
  const int b = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int c_out = config_.stage_dim(stage);
  Tensor<T> y = expand_proj_[stage](x);
  y = ad::gather(y, expand_index(b, h, w, c_out), {b, 2 * h, 2 * w, c_out}, "expand_gather");
  y = expand_norm_[stage](y);
  y.set_tag("patch_expand");
  return y;
}

template <typename T>
typename Generator<T>::Output Generator<T>::forward_detailed(const Tensor<T>& image, const Tensor<T>& mask) const {
  if (image.rank() != 4 || image.dim(1) != 3) throw ShapeError("generator: image must be [B,3,H,W]");
  if (mask.rank() != 4 || mask.dim(1) != 1 || mask.dim(0) != image.dim(0) || mask.dim(2) != image.dim(2) ||
      mask.dim(3) != image.dim(3))
    throw ShapeError("generator: mask must be [B,1,H,W] matching the image");
  const int b = image.dim(0), h = image.dim(2), w = image.dim(3), p = config_.patch_size;
  if (h != w) throw ShapeError("generator: only square images are supported");
  config_.check_image_side(h);

  Tensor<T> keep = ad::add_scalar(ad::scale(mask, T{-1}), T{1});
  Tensor<T> input = ad::concat<T>({ad::mul(image, keep), mask}, 1);
  input.set_tag("input");

  Tensor<T> x = ad::gather(input, patchify_index(b, config_.input_channels, h, w, p),
                           {b, h / p, w / p, p * p * config_.input_channels}, "patchify");
  x = embed_norm_(embed_(x));
  x.set_tag("patch_embed");

  const int stages = config_.stages();
  for (int s = 0; s < stages; ++s) {
    for (const auto& blk : encoder_[s]) x = blk(x);
    if (s + 1 < stages) x = merge(s, x);
  }
  x.set_tag("bottleneck");
  Tensor<T> bottleneck = x;

  for (int s = stages - 2; s >= 0; --s) {
    x = expand(s, x);
    for (const auto& blk : decoder_[s]) x = blk(x);
  }
  x = unembed_(out_norm_(x));
  x = ad::gather(x, unpatchify_index(b, config_.output_channels, h / p, w / p, p), {b, config_.output_channels, h, w},
                 "unpatchify");
  Tensor<T> out = ad::add_scalar(ad::scale(ad::tanh(x), T(0.5)), T(0.5));
  out.set_tag("output");
  if (!ad::all_finite(out)) throw NumericError("generator output is not finite");
  return {out, bottleneck};
}

template <typename T>
Image Generator<T>::inpaint(const Image& image, const BinaryMap& mask, bool composite) const {
  if (image.height() != mask.height() || image.width() != mask.width())
    throw ShapeError("inpaint: image and mask differ in size");
  ad::NoGradGuard guard;
  Tensor<T> out = forward(nn::images_to_tensor<T>({image}), nn::maps_to_tensor<T>({mask}));
  Image result = nn::tensor_to_images(out).front();
  if (composite)
    for (int r = 0; r < image.height(); ++r)
      for (int c = 0; c < image.width(); ++c)
        if (!mask(r, c))
          for (int ch = 0; ch < 3; ++ch) result.at(r, c, ch) = image.at(r, c, ch);
  return result;
}

template <typename T>
const SwinBlock<T>& Generator<T>::block(int stage, int index, bool decoder) const {
  const auto& stages = decoder ? decoder_ : encoder_;
  if (stage < 0 || stage >= static_cast<int>(stages.size()) || index < 0 ||
      index >= static_cast<int>(stages[stage].size()))
    throw ParameterError("generator: no such block");
  return stages[stage][index];
}

// ---------------------------------------------------------------- audit

template <typename T>
GraphAudit audit_graph(const Tensor<T>& output, const Tensor<T>& bottleneck) {
  using NodeT = ad::Node<T>;
  if (!output.defined() || !bottleneck.defined()) throw ParameterError("audit_graph: undefined tensor");
  if (!bottleneck.node()->requires_grad)
    throw ParameterError("audit_graph: graph was not recorded (run with gradients enabled)");

  auto walk = [](const NodeT* start, const NodeT* stop, auto&& visit) {
    std::unordered_set<const NodeT*> seen{start};
    std::vector<const NodeT*> stack{start};
    while (!stack.empty()) {
      const NodeT* n = stack.back();
      stack.pop_back();
      visit(n);
      if (n == stop) continue;
      for (const auto& p : n->parents)
        if (p && seen.insert(p.get()).second) stack.push_back(p.get());
    }
  };

  std::unordered_set<const NodeT*> encoder;
  walk(bottleneck.node(), nullptr, [&](const NodeT* n) {
    if (n != bottleneck.node() && std::string_view(n->op) != "parameter") encoder.insert(n);
  });

  GraphAudit audit;
  walk(output.node(), nullptr, [&](const NodeT* n) {
    if (n->tag == "patch_merge") ++audit.merge_ops;
    if (n->tag == "patch_expand") ++audit.expand_ops;
  });
  walk(output.node(), bottleneck.node(), [&](const NodeT* n) {
    if (n == bottleneck.node()) return;
    if (encoder.count(n)) ++audit.skip_paths;
    if (std::string_view(n->op) == "concat") ++audit.decoder_concats;
  });
  return audit;
}

template class WindowAttention<float>;
template class WindowAttention<double>;
template class SwinBlock<float>;
template class SwinBlock<double>;
template class Generator<float>;
template class Generator<double>;
template Tensor<float> shifted_window_mask<float>(int, int, int, int);
template Tensor<double> shifted_window_mask<double>(int, int, int, int);
template GraphAudit audit_graph<float>(const Tensor<float>&, const Tensor<float>&);
template GraphAudit audit_graph<double>(const Tensor<double>&, const Tensor<double>&);

}  // namespace symface

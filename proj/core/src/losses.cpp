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

#include "symface/losses.hpp"

#include <cmath>

#include "symface/errors.hpp"

namespace symface {

using ad::Tensor;

namespace {

constexpr double kProbEps = 1e-6;

// The one place the weighted objective is spelled out; shared by the scalar
// `combine` and the differentiable `total`. Zero-weight terms are left out
// entirely, so e.g. delta = 0 removes the semantic critics from the graph.
template <typename V, typename Add, typename Scale>
V weighted_sum(const std::array<V, 5>& terms, const LossWeights& w, V zero, Add add, Scale scale) {
  const std::array<double, 5> coef = {w.alpha, w.beta, w.gamma, w.delta, w.perceptual_weight};
  V acc = zero;
  for (std::size_t i = 0; i < terms.size(); ++i)
    if (coef[i] != 0.0) acc = add(acc, scale(terms[i], coef[i]));
  return acc;
}

template <typename T>
Tensor<T> zero_scalar() {
  return Tensor<T>::scalar(T{0});
}

// Weighted expectation over batch items of the per-item mean of t.
template <typename T>
Tensor<T> item_expectation(const Tensor<T>& t, const Tensor<T>& weights) {
  return ad::sum(ad::mul(ad::mean_trailing(t, 1), weights));
}

template <typename T>
Tensor<T> weight_tensor(int batch, const std::vector<double>& item_weights) {
  std::vector<T> w(batch, T(1.0 / batch));
  if (!item_weights.empty()) {
    if (static_cast<int>(item_weights.size()) != batch) throw ShapeError("item weights do not match the batch");
    for (int i = 0; i < batch; ++i) w[i] = static_cast<T>(item_weights[i]);
  }
  return Tensor<T>::constant({batch}, std::move(w));
}

template <typename T>
void require_finite(const Tensor<T>& t, const char* what) {
  if (!ad::all_finite(t)) throw NumericError(std::string(what) + " is not finite");
}

template <typename T>
double checked_value(const Tensor<T>& t, const std::string& term) {
  const double v = static_cast<double>(t.item());
  if (!std::isfinite(v)) throw NumericError("loss term '" + term + "' is not finite");
  return v;
}

}  // namespace

std::string_view pixel_norm_name(PixelNorm norm) { return norm == PixelNorm::kL1 ? "L1" : "L2"; }

PixelNorm pixel_norm_from_name(std::string_view name) {
  if (name == "L1" || name == "l1") return PixelNorm::kL1;
  if (name == "L2" || name == "l2") return PixelNorm::kL2;
  throw ConfigError("unknown pixel norm '" + std::string(name) + "' (expected L1 or L2)");
}

void LossWeights::validate() const {
  for (double v : {alpha, beta, gamma, delta, perceptual_weight})
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("loss weights must be finite and >= 0");
  for (double v : omega)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("omega weights must be finite and >= 0");
}

double combine(const LossTerms& t, const LossWeights& w) {
  return weighted_sum<double>({t.pixel, t.adversarial, t.feature_matching, t.homogeneity, t.perceptual}, w, 0.0,
                              [](double a, double b) { return a + b; }, [](double a, double c) { return a * c; });
}

std::vector<std::string> LossReport::csv_columns() {
  std::vector<std::string> cols = {"pixel", "adv_g", "fm", "perceptual"};
  for (Part p : kFaceParts) cols.push_back("part_" + std::string(part_name(p)));
  cols.push_back("homogeneity");
  cols.push_back("adv_d_patch");
  for (Part p : kFaceParts) cols.push_back("adv_d_" + std::string(part_name(p)));
  cols.push_back("discriminator_total");
  cols.push_back("total");
  return cols;
}

std::vector<double> LossReport::csv_values() const {
  std::vector<double> v = {pixel, adv_g, fm, perceptual};
  v.insert(v.end(), part.begin(), part.end());
  v.push_back(homogeneity);
  v.insert(v.end(), adv_d.begin(), adv_d.end());
  v.push_back(discriminator_total);
  v.push_back(total);
  return v;
}

template <typename T>
Tensor<T> pixel_wise(const Tensor<T>& x, const Tensor<T>& xhat, PixelNorm norm) {
  if (x.shape() != xhat.shape())
    throw ShapeError("pixel_wise: " + ad::to_string(x.shape()) + " vs " + ad::to_string(xhat.shape()));
  Tensor<T> d = ad::sub(x, xhat);
  return ad::mean(norm == PixelNorm::kL1 ? ad::abs(d) : ad::square(d));
}

template <typename T>
Tensor<T> clamped_probability(const Tensor<T>& logits) {
  return ad::clamp(ad::sigmoid(logits), static_cast<T>(kProbEps), static_cast<T>(1.0 - kProbEps));
}

namespace {

template <typename T>
Tensor<T> log_one_minus(const Tensor<T>& p) {
  return ad::log(ad::add_scalar(ad::scale(p, T{-1}), T{1}));
}

template <typename T>
CriticLosses<T> losses_from_outputs(const CriticOutput<T>& real, const CriticOutput<T>& fake_detached,
                                    const CriticOutput<T>& fake_frozen, const Tensor<T>& w) {
  require_finite(real.logits, "critic logits on the real image");
  require_finite(fake_detached.logits, "critic logits on the fake image");
  require_finite(fake_frozen.logits, "critic logits on the fake image");
  CriticLosses<T> out;
  Tensor<T> real_term = item_expectation(ad::log(clamped_probability(real.logits)), w);
  Tensor<T> fake_term = item_expectation(log_one_minus(clamped_probability(fake_detached.logits)), w);
  out.d = ad::scale(ad::add(real_term, fake_term), T{-1});
  out.g = ad::scale(item_expectation(ad::log(clamped_probability(fake_frozen.logits)), w), T{-1});

  if (real.features.size() != fake_frozen.features.size())
    throw ShapeError("feature matching: layer counts differ");
  Tensor<T> fm = zero_scalar<T>();
  for (std::size_t l = 0; l < real.features.size(); ++l) {
    const Tensor<T>& f = real.features[l];
    const Tensor<T>& g = fake_frozen.features[l];
    if (f.shape() != g.shape()) throw ShapeError("feature matching: layer " + std::to_string(l) + " shapes differ");
    fm = ad::add(fm, item_expectation(ad::abs(ad::sub(ad::stop_gradient(f), g)), w));
  }
  out.fm = fm;
  return out;
}

}  // namespace

template <typename T>
CriticLosses<T> critic_losses(const Critic<T>& critic, const Tensor<T>& real, const Tensor<T>& fake,
                              const std::vector<double>& item_weights) {
  if (real.shape() != fake.shape()) throw ShapeError("critic losses: real and fake shapes differ");
  const Tensor<T> w = weight_tensor<T>(real.dim(0), item_weights);
  const auto r = critic.forward(real, nn::ParamMode::kTrainable);
  const auto fd = critic.forward(ad::stop_gradient(fake), nn::ParamMode::kTrainable);
  const auto ff = critic.forward(fake, nn::ParamMode::kFrozen);
  return losses_from_outputs(r, fd, ff, w);
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> adversarial_pair(const Critic<T>& critic, const Tensor<T>& real,
                                                 const Tensor<T>& fake) {
  auto l = critic_losses(critic, real, fake);
  return {l.d, l.g};
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> adversarial_from_logits(const Tensor<T>& real_logits,
                                                        const Tensor<T>& fake_logits_detached,
                                                        const Tensor<T>& fake_logits_frozen) {
  if (real_logits.rank() == 0) throw ShapeError("adversarial: logits need a batch dimension");
  CriticOutput<T> r{real_logits, {}}, fd{fake_logits_detached, {}}, ff{fake_logits_frozen, {}};
  const Tensor<T> w = weight_tensor<T>(real_logits.dim(0), {});
  auto l = losses_from_outputs(r, fd, ff, w);
  return {l.d, l.g};
}

template <typename T>
Tensor<T> feature_matching(const Critic<T>& critic, const Tensor<T>& x, const Tensor<T>& xhat) {
  return critic_losses(critic, x, xhat).fm;
}

template <typename T>
Tensor<T> feature_matching_from_features(const std::vector<Tensor<T>>& real, const std::vector<Tensor<T>>& fake) {
  if (real.size() != fake.size()) throw ShapeError("feature matching: layer counts differ");
  Tensor<T> fm = zero_scalar<T>();
  for (std::size_t l = 0; l < real.size(); ++l) {
    if (real[l].shape() != fake[l].shape()) throw ShapeError("feature matching: shapes differ");
    fm = ad::add(fm, ad::mean(ad::abs(ad::sub(ad::stop_gradient(real[l]), fake[l]))));
  }
  return fm;
}

template <typename T>
RandomConvEncoder<T>::RandomConvEncoder(std::uint64_t seed, std::vector<int> channels) {
  Rng rng = Rng::derive(seed, {0x70657263u});
  int in = 3;
  for (int out : channels) {
    const double sigma = std::sqrt(2.0 / (9.0 * in));
    std::vector<T> w(static_cast<std::size_t>(out) * in * 9);
    for (T& v : w) v = static_cast<T>(rng.normal() * sigma);
    weights_.push_back(Tensor<T>::constant({out, in, 3, 3}, std::move(w)));
    std::vector<T> b(out);
    for (T& v : b) v = static_cast<T>(rng.uniform(-0.1, 0.1));
    biases_.push_back(Tensor<T>::constant({out}, std::move(b)));
    in = out;
  }
}

template <typename T>
std::vector<Tensor<T>> RandomConvEncoder<T>::stages(const Tensor<T>& image) const {
  std::vector<Tensor<T>> out;
  Tensor<T> x = image;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    x = ad::leaky_relu(ad::conv2d(x, weights_[i], biases_[i], 2, 1), T(0.2));
    out.push_back(x);
  }
  return out;
}

template <typename T>
Tensor<T> perceptual(const FeatureEncoder<T>& encoder, const Tensor<T>& x, const Tensor<T>& xhat) {
  if (x.shape() != xhat.shape()) throw ShapeError("perceptual: shapes differ");
  const auto fx = encoder.stages(x);
  const auto fy = encoder.stages(xhat);
  Tensor<T> acc = zero_scalar<T>();
  for (std::size_t s = 0; s < fx.size(); ++s) acc = ad::add(acc, ad::mean(ad::abs(ad::sub(fx[s], fy[s]))));
  return acc;
}

template <typename T>
PartLoss<T> part_loss(Part part, const Tensor<T>& x, const Tensor<T>& xhat, const Tensor<T>& part_mask,
                      const SemanticDiscriminator<T>& critic) {
  face_part_index(part);  // rejects background
  if (part_mask.rank() != 4 || part_mask.dim(0) != x.dim(0)) throw ShapeError("part_loss: mask must be [B,1,H,W]");
  const int b = part_mask.dim(0);
  const std::int64_t per_item = part_mask.numel() / b;
  std::vector<double> w(b, 0.0);
  int present = 0;
  auto mv = part_mask.values();
  for (int i = 0; i < b; ++i) {
    bool any = false;
    for (std::int64_t k = 0; k < per_item && !any; ++k) any = mv[i * per_item + k] != T{0};
    if (any) {
      w[i] = 1.0;
      ++present;
    }
  }
  PartLoss<T> out;
  if (present == 0) {
    out.value = zero_scalar<T>();
    out.d = zero_scalar<T>();
    out.skipped = true;
    return out;
  }
  for (double& v : w) v /= present;
  auto l = critic_losses<T>(critic, extract_part(x, part_mask), extract_part(xhat, part_mask), w);
  out.value = ad::add(l.g, l.fm);
  out.d = l.d;
  return out;
}

template <typename T>
std::array<Tensor<T>, 6> part_mask_tensors(const std::vector<PartMaskSet>& parts) {
  std::array<Tensor<T>, 6> out;
  for (std::size_t i = 0; i < kFaceParts.size(); ++i) {
    std::vector<BinaryMap> maps;
    maps.reserve(parts.size());
    for (const auto& p : parts) maps.push_back(p.mask(kFaceParts[i]));
    out[i] = nn::maps_to_tensor<T>(maps);
  }
  return out;
}

template <typename T>
Tensor<T> homogeneity(const std::array<PartLoss<T>, 6>& parts, const std::array<double, 6>& omega) {
  Tensor<T> acc = zero_scalar<T>();
  for (std::size_t i = 0; i < parts.size(); ++i)
    if (!parts[i].skipped) acc = ad::add(acc, ad::scale(parts[i].value, static_cast<T>(omega[i])));
  return acc;
}

template <typename T>
Objective<T> total(const Tensor<T>& x, const Tensor<T>& xhat, const std::array<Tensor<T>, 6>& part_masks,
                   const DiscriminatorBank<T>& discs, const LossWeights& weights, const FeatureEncoder<T>* encoder) {
  weights.validate();
  if (weights.perceptual_weight > 0 && !encoder)
    throw ParameterError("perceptual_weight > 0 needs a feature encoder");

  Objective<T> obj;
  LossReport& rep = obj.report;
  const Tensor<T> pixel = pixel_wise(x, xhat, weights.pixel_norm);
  const CriticLosses<T> patch = critic_losses<T>(*discs.patch, x, xhat);
  std::array<PartLoss<T>, 6> parts;
  for (std::size_t i = 0; i < kFaceParts.size(); ++i)
    parts[i] = part_loss<T>(kFaceParts[i], x, xhat, part_masks[i], *discs.parts[i]);
  const Tensor<T> hg = homogeneity(parts, weights.omega);
  const Tensor<T> perc = encoder ? perceptual(*encoder, x, xhat) : zero_scalar<T>();

  obj.generator = weighted_sum<Tensor<T>>(
      {pixel, patch.g, patch.fm, hg, perc}, weights, zero_scalar<T>(),
      [](const Tensor<T>& a, const Tensor<T>& b) { return ad::add(a, b); },
      [](const Tensor<T>& a, double c) { return ad::scale(a, static_cast<T>(c)); });
  obj.discriminator = patch.d;
  for (const auto& p : parts) obj.discriminator = ad::add(obj.discriminator, p.d);

  rep.pixel = checked_value(pixel, "pixel");
  rep.adv_g = checked_value(patch.g, "adv_g");
  rep.fm = checked_value(patch.fm, "fm");
  rep.perceptual = checked_value(perc, "perceptual");
  rep.adv_d[0] = checked_value(patch.d, "adv_d_patch");
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string name(part_name(kFaceParts[i]));
    rep.part[i] = checked_value(parts[i].value, "part_" + name);
    rep.part_skipped[i] = parts[i].skipped;
    rep.adv_d[i + 1] = checked_value(parts[i].d, "adv_d_" + name);
  }
  rep.homogeneity = checked_value(hg, "homogeneity");
  rep.total = checked_value(obj.generator, "total");
  rep.discriminator_total = checked_value(obj.discriminator, "discriminator_total");
  return obj;
}

#define SYMFACE_INSTANTIATE(T)                                                                                      \
  template Tensor<T> pixel_wise<T>(const Tensor<T>&, const Tensor<T>&, PixelNorm);                                \
  template Tensor<T> clamped_probability<T>(const Tensor<T>&);                                                    \
  template CriticLosses<T> critic_losses<T>(const Critic<T>&, const Tensor<T>&, const Tensor<T>&,                 \
                                            const std::vector<double>&);                                          \
  template std::pair<Tensor<T>, Tensor<T>> adversarial_pair<T>(const Critic<T>&, const Tensor<T>&,                \
                                                               const Tensor<T>&);                                 \
  template std::pair<Tensor<T>, Tensor<T>> adversarial_from_logits<T>(const Tensor<T>&, const Tensor<T>&,         \
                                                                      const Tensor<T>&);                          \
  template Tensor<T> feature_matching<T>(const Critic<T>&, const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> feature_matching_from_features<T>(const std::vector<Tensor<T>>&,                             \
                                                       const std::vector<Tensor<T>>&);                            \
  template class RandomConvEncoder<T>;                                                                            \
  template Tensor<T> perceptual<T>(const FeatureEncoder<T>&, const Tensor<T>&, const Tensor<T>&);                 \
  template PartLoss<T> part_loss<T>(Part, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,                   \
                                    const SemanticDiscriminator<T>&);                                             \
  template std::array<Tensor<T>, 6> part_mask_tensors<T>(const std::vector<PartMaskSet>&);                        \
  template Tensor<T> homogeneity<T>(const std::array<PartLoss<T>, 6>&, const std::array<double, 6>&);             \
  template Objective<T> total<T>(const Tensor<T>&, const Tensor<T>&, const std::array<Tensor<T>, 6>&,             \
                                 const DiscriminatorBank<T>&, const LossWeights&, const FeatureEncoder<T>*);

SYMFACE_INSTANTIATE(float)
SYMFACE_INSTANTIATE(double)

#undef SYMFACE_INSTANTIATE

}  // namespace symface

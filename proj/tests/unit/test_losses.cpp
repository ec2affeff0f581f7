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
#include <limits>
#include <numbers>

#include "symface/generator.hpp"
#include "symface/gradcheck.hpp"
#include "symface/losses.hpp"
#include "symface/ops.hpp"
#include "test_util.hpp"

namespace symface {
namespace {

using ad::Tensor;
using testing::random_tensor;

DiscConfig small_disc() {
  DiscConfig c;
  c.layers = 2;
  c.base_channels = 4;
  c.max_multiplier = 2;
  return c;
}

template <typename T>
Tensor<T> face_batch(const std::vector<Sample>& faces) {
  std::vector<Image> imgs;
  for (const auto& f : faces) imgs.push_back(f.image);
  return nn::images_to_tensor<T>(imgs);
}

std::vector<PartMaskSet> parts_of(const std::vector<Sample>& faces) {
  std::vector<PartMaskSet> out;
  for (const auto& f : faces) out.push_back(f.parts);
  return out;
}

TEST(PixelWise, UnitValues) {
  const auto x = random_tensor<double>({2, 3, 4, 4}, 1);
  EXPECT_EQ(pixel_wise(x, x, PixelNorm::kL1).item(), 0.0);
  EXPECT_EQ(pixel_wise(x, x, PixelNorm::kL2).item(), 0.0);
  const auto one = Tensor<double>::full({1, 3, 2, 2}, 1.0);
  const auto zero = Tensor<double>::zeros({1, 3, 2, 2});
  EXPECT_EQ(pixel_wise(one, zero, PixelNorm::kL1).item(), 1.0);
  EXPECT_EQ(pixel_wise(one, zero, PixelNorm::kL2).item(), 1.0);
  const auto half = Tensor<double>::full({1, 3, 2, 2}, 0.5);
  EXPECT_DOUBLE_EQ(pixel_wise(half, zero, PixelNorm::kL2).item(), 0.25);
  EXPECT_THROW(pixel_wise(one, Tensor<double>::zeros({1, 3, 2, 3}), PixelNorm::kL1), ShapeError);
}

TEST(Adversarial, HalfProbabilityValues) {
  const auto zero = Tensor<double>::zeros({4, 1, 2, 2});
  const auto [d, g] = adversarial_from_logits(zero, zero, zero);
  EXPECT_NEAR(d.item(), 2.0 * std::numbers::ln2, 1e-12);
  EXPECT_NEAR(g.item(), std::numbers::ln2, 1e-12);
}

TEST(Adversarial, ClampedProbabilities) {
  const auto p = clamped_probability(Tensor<double>::constant({3}, {-100.0, 0.0, 100.0}));
  EXPECT_DOUBLE_EQ(p.values()[0], 1e-6);
  EXPECT_DOUBLE_EQ(p.values()[1], 0.5);
  EXPECT_DOUBLE_EQ(p.values()[2], 1.0 - 1e-6);
  // Saturated logits give a finite loss.
  const auto big = Tensor<double>::full({1, 1}, 1e4);
  const auto [d, g] = adversarial_from_logits(big, big, Tensor<double>::full({1, 1}, -1e4));
  EXPECT_TRUE(std::isfinite(d.item()));
  EXPECT_NEAR(g.item(), -std::log(1e-6), 1e-9);
}

TEST(Adversarial, NonFiniteLogitsThrow) {
  const auto bad = Tensor<double>::constant({1, 1}, {std::numeric_limits<double>::quiet_NaN()});
  const auto ok = Tensor<double>::zeros({1, 1});
  EXPECT_THROW(adversarial_from_logits(bad, ok, ok), NumericError);
  EXPECT_THROW(adversarial_from_logits(Tensor<double>::scalar(0), ok, ok), ShapeError);
}

TEST(Combine, WeightedTotal) {
  LossTerms t{1, 2, 3, 4, 0};
  EXPECT_EQ(combine(t, LossWeights{}), 410.0);
  LossWeights w;
  w.perceptual_weight = 0.5;
  t.perceptual = 2;
  EXPECT_EQ(combine(t, w), 411.0);
  w.delta = 0;
  EXPECT_EQ(combine(t, w), 331.0);
}

TEST(Combine, ZeroWeightDropsNonFiniteTerm) {
  LossWeights w;
  w.perceptual_weight = 0;
  LossTerms t{1, 2, 3, 4, std::numeric_limits<double>::infinity()};
  EXPECT_EQ(combine(t, w), 410.0);
}

TEST(LossWeights, DefaultsAndValidation) {
  LossWeights w;
  EXPECT_EQ(w.omega_for(Part::kEye), 0.25);
  EXPECT_EQ(w.omega_for(Part::kSkin), 0.083);
  for (Part heavy : {Part::kEye, Part::kLip, Part::kEar})
    for (Part light : {Part::kSkin, Part::kHair, Part::kCloth})
      EXPECT_NEAR(w.omega_for(heavy) / w.omega_for(light), 3.0, 0.02);
  w.gamma = -1;
  EXPECT_THROW(w.validate(), ConfigError);
  EXPECT_EQ(pixel_norm_from_name("L2"), PixelNorm::kL2);
  EXPECT_THROW(pixel_norm_from_name("L3"), ConfigError);
}

TEST(FeatureMatching, GroundTruthFeaturesAreDetached) {
  const auto real = testing::random_parameter<double>({2, 3}, 1);
  const auto fake = testing::random_parameter<double>({2, 3}, 2);
  const auto fm = feature_matching_from_features<double>({real}, {fake});
  fm.backward();
  EXPECT_FALSE(real.has_grad());
  EXPECT_TRUE(fake.has_grad());
  double expected = 0;
  for (int i = 0; i < 6; ++i) expected += std::abs(real.values()[i] - fake.values()[i]) / 6.0;
  EXPECT_NEAR(fm.item(), expected, 1e-15);
  EXPECT_EQ(feature_matching_from_features<double>({real}, {real}).item(), 0.0);
}

TEST(Perceptual, ZeroOnIdenticalInputsAndPositiveOtherwise) {
  RandomConvEncoder<double> enc(3);
  const auto x = random_tensor<double>({1, 3, 16, 16}, 1, 0, 1);
  const auto y = random_tensor<double>({1, 3, 16, 16}, 2, 0, 1);
  EXPECT_EQ(perceptual<double>(enc, x, x).item(), 0.0);
  EXPECT_GT(perceptual<double>(enc, x, y).item(), 0.0);
  EXPECT_EQ(enc.stages(x).size(), 3u);
  IdentityEncoder<double> id;
  EXPECT_NEAR(perceptual<double>(id, x, y).item(), pixel_wise(x, y, PixelNorm::kL1).item(), 1e-12);
}

TEST(PartLoss, EmptyPartIsSkippedWithExactZero) {
  SemanticDiscriminator<double> critic(small_disc(), 1, "disc.part.eye");
  const auto x = random_tensor<double>({2, 3, 16, 16}, 1, 0, 1);
  const auto xhat = testing::random_parameter<double>({2, 3, 16, 16}, 2, 0, 1);
  const auto empty = Tensor<double>::zeros({2, 1, 16, 16});
  const PartLoss<double> l = part_loss<double>(Part::kEye, x, xhat, empty, critic);
  EXPECT_TRUE(l.skipped);
  EXPECT_EQ(l.value.item(), 0.0);
  EXPECT_EQ(l.d.item(), 0.0);

  std::array<PartLoss<double>, 6> parts;
  for (auto& p : parts) p = l;
  parts[0] = part_loss<double>(Part::kSkin, x, xhat, Tensor<double>::full({2, 1, 16, 16}, 1.0), critic);
  ASSERT_FALSE(parts[0].skipped);
  const auto hg = homogeneity(parts, LossWeights{}.omega);
  EXPECT_NEAR(hg.item(), 0.083 * parts[0].value.item(), 1e-12);
}

TEST(PartLoss, ItemsWithoutThePartAreDropped) {
  SemanticDiscriminator<double> critic(small_disc(), 1, "disc.part.lip");
  const auto x = random_tensor<double>({2, 3, 16, 16}, 1, 0, 1);
  const auto xhat = random_tensor<double>({2, 3, 16, 16}, 2, 0, 1);
  std::vector<double> mv(2 * 256, 0.0);
  for (int p = 0; p < 256; ++p) mv[p] = (p % 3 == 0) ? 1.0 : 0.0;  // item 0 only
  const auto mask = Tensor<double>::constant({2, 1, 16, 16}, mv);
  const auto both = part_loss<double>(Part::kLip, x, xhat, mask, critic);
  // Same as running the first item alone.
  auto one = [](const Tensor<double>& t) {
    auto s = t.shape();
    s[0] = 1;
    return Tensor<double>::constant(s, std::vector<double>(t.values().begin(), t.values().begin() + ad::numel(s)));
  };
  const auto alone = part_loss<double>(Part::kLip, one(x), one(xhat), one(mask), critic);
  EXPECT_NEAR(both.value.item(), alone.value.item(), 1e-12);
  EXPECT_NEAR(both.d.item(), alone.d.item(), 1e-12);
}

TEST(Total, ReportMatchesCombine) {
  const auto faces = generate_faces(1, 2, 32, 0.0);
  DiscriminatorBank<double> bank(small_disc(), 2);
  Generator<double> g(SwinConfig{}, 3);
  const auto x = face_batch<double>(faces);
  const auto xhat = random_tensor<double>({2, 3, 32, 32}, 4, 0, 1);
  const auto masks = part_mask_tensors<double>(parts_of(faces));
  const auto obj = total<double>(x, xhat, masks, bank, LossWeights{});
  EXPECT_NEAR(obj.report.total, combine(obj.report.terms(), LossWeights{}), 1e-9);
  EXPECT_EQ(LossReport::csv_columns().size(), obj.report.csv_values().size());
  double hg = 0;
  for (int i = 0; i < 6; ++i) hg += LossWeights{}.omega[i] * obj.report.part[i];
  EXPECT_NEAR(obj.report.homogeneity, hg, 1e-12);
  double dsum = 0;
  for (double v : obj.report.adv_d) dsum += v;
  EXPECT_NEAR(obj.report.discriminator_total, dsum, 1e-12);
  EXPECT_THROW(total<double>(x, xhat, masks, bank, [] {
                 LossWeights w;
                 w.perceptual_weight = 1;
                 return w;
               }()),
               ParameterError);
}

TEST(Total, StopGradientRouting) {
  const auto faces = generate_faces(5, 2, 32, 0.0);
  DiscriminatorBank<float> bank(small_disc(), 2);
  Generator<float> g(SwinConfig{}, 3);
  const auto x = face_batch<float>(faces);
  std::vector<float> mv(2 * 32 * 32, 0.0f);
  for (std::size_t i = 0; i < mv.size(); i += 3) mv[i] = 1.0f;
  const auto m = Tensor<float>::constant({2, 1, 32, 32}, mv);
  const auto masks = part_mask_tensors<float>(parts_of(faces));

  {
    const auto obj = total<float>(x, g.forward(x, m), masks, bank, LossWeights{});
    obj.discriminator.backward();
    for (const auto& [name, p] : g.params().entries()) ASSERT_FALSE(p.has_grad()) << name;
    for (const Critic<float>* c : bank.all()) {
      bool any = false;
      for (const auto& [_, p] : c->params().entries()) any = any || p.has_grad();
      EXPECT_TRUE(any);
    }
  }
  g.params().zero_grad();
  for (Critic<float>* c : bank.all()) c->params().zero_grad();
  {
    const auto obj = total<float>(x, g.forward(x, m), masks, bank, LossWeights{});
    obj.generator.backward();
    for (const Critic<float>* c : bank.all())
      for (const auto& [name, p] : c->params().entries()) ASSERT_FALSE(p.has_grad()) << name;
    EXPECT_TRUE(g.params().find("gen.embed.weight")->has_grad());
  }
}

TEST(Total, GradientsMatchFiniteDifferences) {
  const auto faces = generate_faces(7, 2, 32, 0.0);
  DiscriminatorBank<double> bank(small_disc(), 2);
  const auto x = face_batch<double>(faces);
  const auto xhat = random_tensor<double>({2, 3, 32, 32}, 4, 0.05, 0.95);
  const auto masks = part_mask_tensors<double>(parts_of(faces));
  RandomConvEncoder<double> enc(1, {4, 8});
  LossWeights w;
  w.perceptual_weight = 1.0;
  std::vector<std::size_t> comps;
  for (std::size_t i = 0; i < 6144; i += 97) comps.push_back(i);
  const auto report = ad::grad_check_report<double>(
      [&](const Tensor<double>& xh) { return total<double>(x, xh, masks, bank, w, &enc).generator; }, xhat, 1e-5,
      comps);
  EXPECT_LT(report.max_relative_error, 1e-4);
  // The critics' objective against their own parameters.
  auto dloss = [&]() { return total<double>(x, xhat, masks, bank, w, &enc).discriminator; };
  for (const Critic<double>* c : bank.all()) {
    const auto& p = c->params().entries().front().second;
    const auto r = ad::grad_check_parameter<double>(dloss, p, 1e-5, {0, 5, 17});
    EXPECT_LT(r.max_relative_error, 1e-4) << c->params().entries().front().first;
  }
}

TEST(Total, NonFiniteInputNamesTheTerm) {
  const auto faces = generate_faces(1, 1, 32, 0.0);
  DiscriminatorBank<double> bank(small_disc(), 2);
  const auto x = face_batch<double>(faces);
  auto bad = random_tensor<double>({1, 3, 32, 32}, 4, 0, 1);
  bad.mutable_values()[0] = std::numeric_limits<double>::quiet_NaN();
  const auto masks = part_mask_tensors<double>(parts_of(faces));
  try {
    total<double>(x, bad, masks, bank, LossWeights{});
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_FALSE(std::string(e.what()).empty());
  }
}

}  // namespace
}  // namespace symface

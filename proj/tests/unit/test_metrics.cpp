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
#include <limits>

#include <Eigen/Eigenvalues>

#include "symface/errors.hpp"
#include "symface/metrics.hpp"
#include "symface/rng.hpp"
#include "symface/toyfaces.hpp"
#include "test_util.hpp"

namespace symface {
namespace {

using testing::TempDir;

Eigen::MatrixXd gaussian(int n, const Eigen::VectorXd& mean, const Eigen::VectorXd& stddev, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(n, mean.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < mean.size(); ++j) x(i, j) = mean(j) + stddev(j) * rng.normal();
  return x;
}

// Independent route: Tr((Sa Sb)^1/2) as the sum of square roots of the
// (real, non-negative) eigenvalues of the non-symmetric product.
double frechet_oracle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  auto moments = [](const Eigen::MatrixXd& x, Eigen::VectorXd& mu) {
    mu = x.colwise().mean();
    const Eigen::MatrixXd c = x.rowwise() - mu.transpose();
    Eigen::MatrixXd cov = c.transpose() * c / static_cast<double>(x.rows() - 1);
    cov.diagonal().array() += 1e-6;
    return cov;
  };
  Eigen::VectorXd ma, mb;
  const Eigen::MatrixXd sa = moments(a, ma), sb = moments(b, mb);
  Eigen::EigenSolver<Eigen::MatrixXd> es(sa * sb, false);
  double root_trace = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) root_trace += std::sqrt(std::max(0.0, es.eigenvalues()(i).real()));
  return (ma - mb).squaredNorm() + sa.trace() + sb.trace() - 2.0 * root_trace;
}

TEST(Frechet, IdenticalSetsGiveZero) {
  const Eigen::MatrixXd a = gaussian(200, Eigen::VectorXd::Zero(5), Eigen::VectorXd::Ones(5), 1);
  EXPECT_NEAR(frechet_distance(a, a), 0.0, 1e-6);
}

TEST(Frechet, IsSymmetric) {
  const Eigen::MatrixXd a = gaussian(300, Eigen::VectorXd::Zero(4), Eigen::VectorXd::Ones(4), 2);
  const Eigen::MatrixXd b = gaussian(250, Eigen::VectorXd::Constant(4, 0.3), Eigen::Vector4d(1, 2, 0.5, 1), 3);
  EXPECT_NEAR(frechet_distance(a, b), frechet_distance(b, a), 1e-9);
  EXPECT_GE(frechet_distance(a, b), 0.0);
}

TEST(Frechet, MatchesEigenvalueOracle) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Eigen::MatrixXd a = gaussian(150, Eigen::VectorXd::Zero(6), Eigen::VectorXd::LinSpaced(6, 0.5, 2.0), seed);
    Eigen::MatrixXd b = gaussian(120, Eigen::VectorXd::LinSpaced(6, -1, 1), Eigen::VectorXd::Ones(6), seed + 10);
    b.col(1) += 0.7 * b.col(0);  // correlated
    const double want = frechet_oracle(a, b);
    EXPECT_NEAR(frechet_distance(a, b), want, 1e-8 * std::max(1.0, want));
  }
}

TEST(Frechet, ApproachesMeanGapForIdentityCovariance) {
  Eigen::VectorXd shift(3);
  shift << 1.0, -2.0, 0.5;
  // sampling noise on the mean gap is about 2|shift|/sqrt(N) ~ 0.01
  const Eigen::MatrixXd a = gaussian(400000, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(3), 7);
  const Eigen::MatrixXd b = gaussian(400000, shift, Eigen::VectorXd::Ones(3), 8);
  EXPECT_NEAR(frechet_distance(a, b), shift.squaredNorm(), 0.05);
}

TEST(Frechet, Errors) {
  const Eigen::MatrixXd a = Eigen::MatrixXd::Random(10, 3);
  EXPECT_THROW(frechet_distance(a, Eigen::MatrixXd::Random(10, 4)), ShapeError);
  EXPECT_THROW(frechet_distance(a, Eigen::MatrixXd::Random(1, 3)), ShapeError);
  Eigen::MatrixXd bad = a;
  bad(2, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(frechet_distance(a, bad), NumericError);
}

Image noisy(const Image& base, double amplitude, std::uint64_t seed) {
  Rng rng(seed);
  Image out = base;
  for (float& v : out.data()) v = static_cast<float>(std::clamp(v + amplitude * rng.uniform(-1.0, 1.0), 0.0, 1.0));
  return out;
}

TEST(Perceptual, ZeroOnIdenticalAndSymmetric) {
  const Sample s = generate_face(1, 32, 0.0);
  const Image other = noisy(s.image, 0.2, 4);
  for (const FeatureExtractor& fx : {FeatureExtractor::flatten_pixels(), FeatureExtractor::random_conv(3)}) {
    EXPECT_EQ(perceptual_distance(fx, s.image, s.image), 0.0);
    EXPECT_NEAR(perceptual_distance(fx, s.image, other), perceptual_distance(fx, other, s.image), 1e-12);
    EXPECT_GT(perceptual_distance(fx, s.image, other), 0.0);
  }
}

TEST(Perceptual, FlattenPixelsIsMonotoneInPixelMse) {
  const FeatureExtractor fx = FeatureExtractor::flatten_pixels();
  const Sample s = generate_face(2, 32, 0.0);
  std::vector<std::pair<double, double>> pairs;
  for (int k = 0; k < 12; ++k) {
    const Image other = noisy(s.image, 0.03 * (k + 1), 100 + k);
    pairs.emplace_back(mean_squared_error(s.image, other), perceptual_distance(fx, s.image, other));
  }
  std::sort(pairs.begin(), pairs.end());
  for (std::size_t k = 1; k < pairs.size(); ++k) EXPECT_GE(pairs[k].second, pairs[k - 1].second);
  for (const auto& [mse, p] : pairs) EXPECT_NEAR(p, mse, 1e-9);
}

TEST(Perceptual, RandomConvIsNotPermutationInvariant) {
  // negative control: shuffling pixels changes the features
  const FeatureExtractor fx = FeatureExtractor::random_conv(5);
  const Sample s = generate_face(3, 32, 0.0);
  Image shuffled = s.image;
  Rng rng(9);
  const int n = 32 * 32;
  for (int p = n - 1; p > 0; --p) {
    const int q = static_cast<int>(rng.uniform_int(0, p));
    for (int ch = 0; ch < 3; ++ch) std::swap(shuffled.at(p / 32, p % 32, ch), shuffled.at(q / 32, q % 32, ch));
  }
  EXPECT_GT(perceptual_distance(fx, s.image, shuffled), 1e-6);
}

TEST(Features, ShapesAndDeterminism) {
  const auto faces = generate_faces(10, 3, 32, 0.1);
  std::vector<Image> imgs;
  for (const auto& f : faces) imgs.push_back(f.image);
  const Eigen::MatrixXd a = FeatureExtractor::flatten_pixels().extract(imgs);
  EXPECT_EQ(a.rows(), 3);
  EXPECT_EQ(a.cols(), 192);
  const Eigen::MatrixXd r1 = FeatureExtractor::random_conv(4, 16).extract(imgs);
  const Eigen::MatrixXd r2 = FeatureExtractor::random_conv(4, 16).extract(imgs);
  EXPECT_EQ(r1.cols(), 16);
  EXPECT_TRUE(r1 == r2);
  EXPECT_FALSE(r1 == FeatureExtractor::random_conv(5, 16).extract(imgs));
}

TEST(Features, ExternalCsv) {
  TempDir dir;
  Eigen::MatrixXd m(3, 2);
  m << 1, 2, 3.5, -4, 1e-9, 6;
  write_feature_csv(dir / "f.csv", m);
  const FeatureExtractor fx = FeatureExtractor::external(dir / "f.csv");
  EXPECT_TRUE(fx.extract(std::vector<Image>(3, Image(32, 32, 3))) == m);
  EXPECT_THROW(fx.extract(std::vector<Image>(2, Image(32, 32, 3))), ShapeError);
  EXPECT_THROW(fx.stages(Image(32, 32, 3)), ParameterError);

  std::ofstream(dir / "h.csv") << "f0,f1\n\n1,2\n3,4\n";
  EXPECT_EQ(read_feature_csv(dir / "h.csv").rows(), 2);
  std::ofstream(dir / "ragged.csv") << "1,2\n3\n";
  EXPECT_THROW(read_feature_csv(dir / "ragged.csv"), FormatError);
  std::ofstream(dir / "text.csv") << "1,2\n3,x\n";
  EXPECT_THROW(read_feature_csv(dir / "text.csv"), FormatError);
}

TEST(PixelMetrics, KnownValues) {
  Image a(4, 4, 3, 0.25f), b(4, 4, 3, 0.75f);
  EXPECT_DOUBLE_EQ(mean_abs_error(a, b), 0.5);
  EXPECT_DOUBLE_EQ(mean_squared_error(a, b), 0.25);
  EXPECT_NEAR(psnr(a, b), 10.0 * std::log10(1.0 / 0.25), 1e-12);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
}

TEST(SymmetryError, ZeroOnSymmetricFace) {
  const Sample s = generate_face(8, 64, 0.0);
  EXPECT_NEAR(symmetry_error(s, s.image, Part::kEye), 0.0, 1e-7);
  EXPECT_NEAR(symmetry_error(s, s.image, Part::kEar), 0.0, 1e-7);
}

TEST(SymmetryError, RecoloredEyeGivesOffset) {
  const Sample s = generate_face(9, 64, 0.0);
  Image img = s.image;
  for (int r = 0; r < 64; ++r)
    for (int c = s.midline_x + 1; c < 64; ++c)
      if (s.parts.at(r, c) == Part::kEye)
        for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) += 0.5f;
  EXPECT_NEAR(symmetry_error(s, img, Part::kEye), 0.5, 1e-6);
}

TEST(SymmetryError, IgnoresBackground) {
  const Sample s = generate_face(10, 64, 0.3);
  Image img = s.image;
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c)
      if (s.parts.at(r, c) == Part::kBackground)
        for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = 0.1f * ch;
  EXPECT_EQ(symmetry_error(s, img, Part::kEye), symmetry_error(s, s.image, Part::kEye));
}

TEST(SymmetryError, MissingOrganThrows) {
  FaceLayout layout;
  layout.eyes = false;
  const Sample s = generate_face(11, 64, 0.0, layout);
  EXPECT_THROW(symmetry_error(s, s.image, Part::kEye), OrganNotFoundError);
}

}  // namespace
}  // namespace symface

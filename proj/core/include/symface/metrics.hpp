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


// Distribution and per-image metrics: Frechet distance between feature
// sets, a perceptual distance, pixel errors and a left/right symmetry error.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "symface/grid.hpp"
#include "symface/losses.hpp"
#include "symface/toyfaces.hpp"

namespace symface {

/// Frozen image -> feature map. Stand-ins for pretrained backbones; the
/// external kind reads a precomputed matrix (one CSV row per image).
class FeatureExtractor {
 public:
  enum class Kind { kFlattenPixels, kRandomConv, kExternal };

  /// Area-downsampled to 8x8, flattened (192 values).
  static FeatureExtractor flatten_pixels();
  /// Global average of each stage of a fixed random conv stack, projected
  /// to `dims` values by a fixed Gaussian matrix.
  static FeatureExtractor random_conv(std::uint64_t seed, int dims = 64);
  static FeatureExtractor external(std::filesystem::path csv);

  Kind kind() const { return kind_; }
  int dims() const { return dims_; }

  /// One row per image. The external kind ignores the pixels and checks the
  /// row count instead.
  Eigen::MatrixXd extract(const std::vector<Image>& images) const;

  /// Activations for the perceptual distance, one [1, C, h, w] tensor per
  /// stage. flatten_pixels has a single stage: the raw image.
  std::vector<ad::Tensor<double>> stages(const Image& image) const;

 private:
  FeatureExtractor() = default;

  Kind kind_ = Kind::kFlattenPixels;
  int dims_ = 192;
  std::shared_ptr<const RandomConvEncoder<double>> encoder_;
  Eigen::MatrixXd projection_;  // random_conv: [dims, sum of stage widths]
  std::filesystem::path csv_;
};

/// Rows are samples. Throws ShapeError on a width mismatch or fewer than two
/// rows, NumericError on non-finite input or a clearly negative eigenvalue.
double frechet_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Mean over positions of the squared distance between channel-normalized
/// activations, summed over stages. flatten_pixels skips the normalization,
/// which makes it the plain pixel MSE.
double perceptual_distance(const FeatureExtractor& extractor, const Image& x, const Image& xhat);

double mean_abs_error(const Image& a, const Image& b);
double mean_squared_error(const Image& a, const Image& b);
/// Peak 1.0; infinite for identical images.
double psnr(const Image& a, const Image& b);

/// Mean |x(p) - x(mirror p)| over channels and over the right-hand organ
/// pixels whose mirror is a left-hand organ pixel (labels from `sample`).
/// Throws OrganNotFoundError when that support is empty.
double symmetry_error(const Sample& sample, const Image& inpainted, Part organ);

/// Plain numeric CSV, one row per sample; blank lines and a non-numeric
/// header row are skipped.
Eigen::MatrixXd read_feature_csv(const std::filesystem::path& path);
void write_feature_csv(const std::filesystem::path& path, const Eigen::MatrixXd& features);

}  // namespace symface

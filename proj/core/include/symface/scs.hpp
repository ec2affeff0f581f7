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


// Occlusion influence of K x K tiles on the reconstruction of a held-out
// region, and the symmetry concentration score built from it.

#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "symface/generator.hpp"
#include "symface/grid.hpp"
#include "symface/toyfaces.hpp"

namespace symface {

/// Deterministic (image, mask) -> image map. The oracles make the score
/// checkable without a trained network.
class Inpainter {
 public:
  enum class Kind { kModel, kMirrorFill, kConstantFill, kLocalFill };

  /// Composited generator output.
  static Inpainter model(std::shared_ptr<const Generator<float>> generator);
  /// Hole pixel (r, c) <- image(r, 2*midline - c) when that source is known,
  /// else gray 0.5.
  static Inpainter mirror_fill();
  static Inpainter constant_fill(float value);
  /// Hole pixel <- mean of known pixels within `radius` (Chebyshev), repeated
  /// until every hole pixel is filled.
  static Inpainter local_fill(int radius = 5);

  /// Parses model:CKPT | mirror | constant:V | local:R.
  static Inpainter from_spec(const std::string& spec);

  Kind kind() const { return kind_; }
  std::string describe() const;

  /// `midline` is only read by mirror_fill.
  Image operator()(const Image& image, const BinaryMap& mask, int midline) const;

 private:
  Inpainter(Kind kind, float value, int radius, std::shared_ptr<const Generator<float>> generator)
      : kind_(kind), value_(value), radius_(radius), generator_(std::move(generator)) {}

  Kind kind_;
  float value_ = 0.5f;
  int radius_ = 5;
  std::shared_ptr<const Generator<float>> generator_;
};

/// Mean over the pixels of `region` and over channels of |a - b|.
double region_mean_abs_diff(const Image& a, const Image& b, const BinaryMap& region);

/// A = inpaint(M), B = inpaint(M + tile); mean |A - B| over M. Throws
/// ParameterError when the tile overlaps M or leaves the image.
double influence(const Inpainter& inpainter, const Sample& sample, const BinaryMap& held_out, int i, int j, int K);

struct InfluenceHeatmap {
  int K = 0;
  Plane<double> values;    // tile (i, j) = rows i*K.., columns j*K..
  BinaryMap excluded;      // no face pixel in the tile, or overlaps M
  BinaryMap held_out;      // M
  BinaryMap face;

  int rows() const { return values.height(); }
  int cols() const { return values.width(); }
  int tile_count() const { return rows() * cols(); }
  double max_value() const;
};

/// True when any pixel of tile (i, j) is set in `map`.
bool tile_overlaps(const BinaryMap& map, int i, int j, int K);

/// Influence of every eligible tile; excluded tiles hold 0. The sweep runs on
/// `workers` threads and merges by tile index, so the result does not depend
/// on the worker count.
InfluenceHeatmap heatmap(const Inpainter& inpainter, const Sample& sample, const BinaryMap& held_out, int K,
                         int workers = 1);

enum class ScsTarget { kEye, kHalfFace };

std::string_view scs_target_name(ScsTarget target);
/// Accepts "eye", "half" and "half_face".
ScsTarget scs_target_from_name(std::string_view name);

inline constexpr std::array<int, 3> kScsTileSizes = {16, 32, 64};

struct ScsRegions {
  BinaryMap held_out;  // M
  BinaryMap mirror;    // R
};

/// Eye: M = right eye box, R = its reflection. Half face: M = right half,
/// R = reflection of the eye, lip and ear pixels inside M.
ScsRegions scs_regions(const Sample& sample, ScsTarget target);

struct ScsResult {
  double value = 0.0;
  std::array<double, 3> per_k{};  // in kScsTileSizes order
  std::vector<InfluenceHeatmap> heatmaps;
  ScsRegions regions;
};

/// Per K: heatmap / max (0 when the max is 0), averaged over eligible tiles
/// overlapping R; then the mean over K in {16, 32, 64}.
double scs_from_heatmap(const InfluenceHeatmap& map, const BinaryMap& mirror);

ScsResult scs(const Inpainter& inpainter, const Sample& sample, ScsTarget target, int workers = 1);

/// Grayscale (value / max), nearest-upsampled to the image size, with the
/// face boundary drawn in red.
Image render_heatmap(const InfluenceHeatmap& map);
void write_heatmap_png(const std::filesystem::path& path, const InfluenceHeatmap& map);

struct HeatmapRow {
  int i = 0;
  int j = 0;
  int K = 0;
  double value = 0.0;
  bool excluded = false;
};

/// Header "i,j,K,value,excluded", one row per tile.
void write_heatmap_csv(const std::filesystem::path& path, const std::vector<InfluenceHeatmap>& maps);
std::vector<HeatmapRow> read_heatmap_csv(const std::filesystem::path& path);

}  // namespace symface

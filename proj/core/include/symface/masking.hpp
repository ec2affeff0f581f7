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

// Hole generators: free-form training masks, organ masks and their growth
// toward the half face, and the K x K tiles swept by the influence heatmaps.
// Convention everywhere: 1 = hole (pixel to inpaint).

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "symface/grid.hpp"
#include "symface/toyfaces.hpp"

namespace symface {

enum class Side { kLeft, kRight };

std::string_view side_name(Side side);
Side side_from_name(std::string_view name);

struct Mask {
  BinaryMap grid;
  std::string spec_tag;

  int height() const { return grid.height(); }
  int width() const { return grid.width(); }
  double hole_fraction() const {
    return grid.size() ? static_cast<double>(count_set(grid)) / static_cast<double>(grid.size()) : 0.0;
  }
};

enum class MaskKind { kAggressive, kNarrow, kMedium, kWide };

std::string_view mask_kind_name(MaskKind kind);
MaskKind mask_kind_from_name(std::string_view name);

struct IntRange {
  int lo = 0;
  int hi = 0;
};

struct RealRange {
  double lo = 0.0;
  double hi = 0.0;
};

/// Parameters of the free-form sampler. Pixel quantities (thickness) refer
/// to a 64 px image and scale linearly with the requested size; rectangle
/// and segment sizes are fractions of the image side.
struct MaskSpec {
  MaskKind kind = MaskKind::kNarrow;
  IntRange strokes;
  IntRange thickness;
  IntRange rectangles;
  RealRange rect_size;
  IntRange vertices{2, 5};
  RealRange segment_length{0.08, 0.25};
  /// Accepted hole fraction [lo, hi].
  double lo = 0.0;
  double hi = 0.9;
  int max_retries = 2000;

  /// Throws ParameterError unless 0 <= lo < hi <= 0.9 and every range is ordered.
  void validate() const;

  /// narrow / medium / wide presets; aggressive picks one of them per sample.
  static MaskSpec preset(MaskKind kind);
};

/// Union of thick random polylines and rectangles, resampled until the hole
/// fraction lands in [lo, hi]. Throws GenerationError (carrying the closest
/// fraction seen) when max_retries attempts all miss.
Mask random_mask(const MaskSpec& spec, std::uint64_t seed, int size);

/// Bounding box, grown by 2 px, of the largest connected component of the
/// organ strictly on `side` of the midline. Throws OrganNotFoundError.
Mask organ_mask(const Sample& sample, Part organ, Side side);

/// Every non-background pixel on `side`; the midline column belongs to both
/// halves.
Mask half_face_mask(const Sample& sample, Side side);

/// Square dilation by `steps` px, restricted to the face pixels of the
/// half on which the hole's centroid lies. steps = 0 returns the input.
Mask grow_mask(const Mask& mask, int steps, const Sample& sample);

/// The K x K square at tile row i, tile column j of a size x size image.
Mask block_mask(int i, int j, int K, int size);

/// Chebyshev dilation with radius `radius`.
BinaryMap dilate(const BinaryMap& map, int radius);

/// 4-connected component count.
int component_count(const BinaryMap& map);

/// Closed half-plane (the midline column is included).
BinaryMap half_plane(int height, int width, int midline, Side side);

/// 8-bit grayscale 0/255 files.
void write_mask(const std::filesystem::path& path, const BinaryMap& mask);
BinaryMap read_mask(const std::filesystem::path& path);

}  // namespace symface

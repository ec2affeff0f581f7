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

// Procedural, bilaterally symmetric toy faces with exact part labels.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "symface/grid.hpp"

namespace symface {

/// Label codes are part of the on-disk format (parts/*.png).
enum class Part : std::uint8_t {
  kBackground = 0,
  kSkin = 1,
  kEye = 2,
  kHair = 3,
  kLip = 4,
  kCloth = 5,
  kEar = 6,
};

inline constexpr int kPartCodeCount = 7;

/// The six parts judged by semantic discriminators, in loss order.
inline constexpr std::array<Part, 6> kFaceParts = {Part::kSkin, Part::kEye,   Part::kHair,
                                                   Part::kLip,  Part::kCloth, Part::kEar};

std::string_view part_name(Part part);
/// Throws ParameterError for names outside {background, skin, eye, hair, lip, cloth, ear}.
Part part_from_name(std::string_view name);

/// One label per pixel, so masks are disjoint and cover the image by construction.
class PartMaskSet {
 public:
  PartMaskSet() = default;
  /// Throws ParameterError if a code is not a known part.
  explicit PartMaskSet(Plane<std::uint8_t> labels);

  int height() const { return labels_.height(); }
  int width() const { return labels_.width(); }
  const Plane<std::uint8_t>& labels() const { return labels_; }
  Part at(int r, int c) const { return static_cast<Part>(labels_(r, c)); }

  BinaryMap mask(Part part) const;
  /// Every non-background pixel.
  BinaryMap face() const;

  bool operator==(const PartMaskSet&) const = default;

 private:
  Plane<std::uint8_t> labels_;
};

/// Checks the disjoint-cover invariant on an explicit list of binary masks
/// (one per label, background included).
bool is_disjoint_cover(std::span<const BinaryMap> masks);

struct Sample {
  Image image;
  PartMaskSet parts;
  int midline_x = 0;
  double asymmetry = 0.0;
  std::uint64_t seed = 0;

  int size() const { return image.height(); }
};

/// Optional parts, for building degenerate faces in tests.
struct FaceLayout {
  bool hair = true;
  bool eyes = true;
  bool ears = true;
  bool lips = true;
  bool cloth = true;
};

/// Deterministic in (seed, size, asymmetry, layout). The axis of symmetry is
/// column size/2; asymmetry only moves and recolors the right-hand eye and
/// ear. size must be >= 32 and a multiple of 16, asymmetry in [0, 1].
Sample generate_face(std::uint64_t seed, int size, double asymmetry, const FaceLayout& layout = {});

/// RGB colors used when writing label images (index = part code).
std::span<const std::array<std::uint8_t, 3>> part_palette();

struct DatasetManifest {
  int format_version = 1;
  int count = 0;
  int size = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> asymmetry;
};

/// Writes images/NNNNNN.png, parts/NNNNNN.png and manifest.json.
DatasetManifest write_dataset(std::span<const Sample> samples, const std::filesystem::path& directory);

DatasetManifest read_manifest(const std::filesystem::path& directory);

/// Throws IntegrityError naming the offending sample when files are missing,
/// malformed or inconsistent with the manifest.
std::vector<Sample> read_dataset(const std::filesystem::path& directory);

/// Convenience: generate `count` faces with seeds seed, seed+1, ...
std::vector<Sample> generate_faces(std::uint64_t seed, int count, int size, double asymmetry);

}  // namespace symface

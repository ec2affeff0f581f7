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

#include <fstream>

#include "symface/png_io.hpp"
#include "symface/toyfaces.hpp"
#include "test_util.hpp"

namespace symface {
namespace {

std::vector<BinaryMap> label_masks(const PartMaskSet& parts) {
  std::vector<BinaryMap> out;
  for (int code = 0; code < kPartCodeCount; ++code) out.push_back(parts.mask(static_cast<Part>(code)));
  return out;
}

TEST(ToyFaces, Deterministic) {
  const Sample a = generate_face(42, 64, 0.3);
  const Sample b = generate_face(42, 64, 0.3);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.parts, b.parts);
  const Sample c = generate_face(43, 64, 0.3);
  EXPECT_NE(a.image, c.image);
}

TEST(ToyFaces, PartsAreADisjointCoverForManySeeds) {
  for (std::uint64_t seed = 0; seed < 120; ++seed) {
    const Sample s = generate_face(seed, seed % 2 ? 64 : 48, (seed % 5) / 4.0);
    const auto masks = label_masks(s.parts);
    ASSERT_TRUE(is_disjoint_cover(masks)) << "seed " << seed;
    // Every face part is present on a default layout.
    for (Part p : kFaceParts) EXPECT_GT(count_set(s.parts.mask(p)), 0u) << part_name(p) << " seed " << seed;
  }
}

TEST(ToyFaces, DisjointCoverRejectsOverlapAndGaps) {
  BinaryMap a(2, 2, 0), b(2, 2, 0);
  a(0, 0) = a(0, 1) = 1;
  b(1, 0) = b(1, 1) = 1;
  EXPECT_TRUE(is_disjoint_cover(std::vector<BinaryMap>{a, b}));
  b(0, 0) = 1;
  EXPECT_FALSE(is_disjoint_cover(std::vector<BinaryMap>{a, b}));
  b(0, 0) = 0;
  b(1, 1) = 0;
  EXPECT_FALSE(is_disjoint_cover(std::vector<BinaryMap>{a, b}));
}

TEST(ToyFaces, ZeroAsymmetryIsMirrorSymmetric) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Sample s = generate_face(seed, 64, 0.0);
    const int m = s.midline_x;
    ASSERT_EQ(m, 32);
    for (int r = 0; r < 64; ++r)
      for (int c = 1; c < 64; ++c) {
        const int mc = 2 * m - c;
        ASSERT_EQ(s.parts.at(r, c), s.parts.at(r, mc)) << "seed " << seed;
        for (int ch = 0; ch < 3; ++ch) ASSERT_EQ(s.image.at(r, c, ch), s.image.at(r, mc, ch));
      }
  }
}

TEST(ToyFaces, AsymmetryOnlyTouchesRightEyeAndEar) {
  int differing = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Sample sym = generate_face(seed, 64, 0.0);
    const Sample asym = generate_face(seed, 64, 1.0);
    for (int r = 0; r < 64; ++r)
      for (int c = 0; c < 64; ++c) {
        if (sym.parts.at(r, c) == asym.parts.at(r, c) && sym.image.at(r, c, 0) == asym.image.at(r, c, 0) &&
            sym.image.at(r, c, 1) == asym.image.at(r, c, 1) && sym.image.at(r, c, 2) == asym.image.at(r, c, 2))
          continue;
        ++differing;
        ASSERT_GT(c, sym.midline_x) << "left half changed, seed " << seed;
        const bool organ = sym.parts.at(r, c) == Part::kEye || sym.parts.at(r, c) == Part::kEar ||
                           asym.parts.at(r, c) == Part::kEye || asym.parts.at(r, c) == Part::kEar;
        ASSERT_TRUE(organ) << "non-organ pixel changed at (" << r << ", " << c << ") seed " << seed;
      }
  }
  EXPECT_GT(differing, 0);
}

TEST(ToyFaces, LayoutCanDropParts) {
  FaceLayout layout;
  layout.eyes = false;
  layout.lips = false;
  const Sample s = generate_face(5, 64, 0.0, layout);
  EXPECT_EQ(count_set(s.parts.mask(Part::kEye)), 0u);
  EXPECT_EQ(count_set(s.parts.mask(Part::kLip)), 0u);
  EXPECT_GT(count_set(s.parts.mask(Part::kSkin)), 0u);
}

TEST(ToyFaces, RejectsBadArguments) {
  EXPECT_THROW(generate_face(0, 40, 0.0), ParameterError);
  EXPECT_THROW(generate_face(0, 16, 0.0), ParameterError);
  EXPECT_THROW(generate_face(0, 64, 1.5), ParameterError);
  EXPECT_THROW(generate_face(0, 64, -0.1), ParameterError);
}

TEST(ToyFaces, PartNames) {
  for (int code = 0; code < kPartCodeCount; ++code) {
    const Part p = static_cast<Part>(code);
    EXPECT_EQ(part_from_name(part_name(p)), p);
  }
  EXPECT_THROW(part_from_name("nose"), ParameterError);
  EXPECT_THROW(PartMaskSet(Plane<std::uint8_t>(2, 2, 9)), ParameterError);
}

TEST(ToyFaces, DatasetRoundTrip) {
  testing::TempDir dir;
  const auto faces = generate_faces(100, 3, 48, 0.5);
  const DatasetManifest written = write_dataset(faces, dir.path());
  EXPECT_EQ(written.count, 3);
  const auto back = read_dataset(dir.path());
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].parts, faces[i].parts);
    EXPECT_EQ(back[i].seed, faces[i].seed);
    EXPECT_EQ(back[i].midline_x, faces[i].midline_x);
    // 8-bit PNG quantization.
    for (std::size_t k = 0; k < faces[i].image.data().size(); ++k)
      ASSERT_NEAR(back[i].image.data()[k], faces[i].image.data()[k], 0.5 / 255.0 + 1e-6);
  }
}

TEST(ToyFaces, DatasetIntegrityErrors) {
  testing::TempDir dir;
  const auto faces = generate_faces(1, 2, 32, 0.0);
  write_dataset(faces, dir.path());
  std::filesystem::remove(dir.path() / "parts" / "000001.png");
  EXPECT_THROW(read_dataset(dir.path()), IntegrityError);

  testing::TempDir bad;
  write_dataset(faces, bad.path());
  Plane<std::uint8_t> codes(32, 32, 9);
  png::write_gray(bad.path() / "parts" / "000000.png", codes);
  EXPECT_THROW(read_dataset(bad.path()), IntegrityError);
}

}  // namespace
}  // namespace symface

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

#include "symface/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "symface/png_io.hpp"
#include "symface/rng.hpp"

namespace symface {
namespace {

void draw_capsule(BinaryMap& m, double x0, double y0, double x1, double y1, double radius) {
  const int cmin = std::max(0, static_cast<int>(std::floor(std::min(x0, x1) - radius)));
  const int cmax = std::min(m.width() - 1, static_cast<int>(std::ceil(std::max(x0, x1) + radius)));
  const int rmin = std::max(0, static_cast<int>(std::floor(std::min(y0, y1) - radius)));
  const int rmax = std::min(m.height() - 1, static_cast<int>(std::ceil(std::max(y0, y1) + radius)));
  const double dx = x1 - x0, dy = y1 - y0;
  const double len2 = dx * dx + dy * dy;
  for (int r = rmin; r <= rmax; ++r)
    for (int c = cmin; c <= cmax; ++c) {
      double t = len2 > 0 ? ((c - x0) * dx + (r - y0) * dy) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double px = x0 + t * dx - c, py = y0 + t * dy - r;
      if (px * px + py * py <= radius * radius) m(r, c) = 1;
    }
}

BinaryMap sample_free_form(const MaskSpec& spec, Rng& rng, int size) {
  BinaryMap m(size, size, 0);
  const double px_scale = size / 64.0;
  const int strokes = rng.uniform_int(spec.strokes.lo, spec.strokes.hi);
  for (int s = 0; s < strokes; ++s) {
    const double thickness = rng.uniform_int(spec.thickness.lo, spec.thickness.hi) * px_scale;
    double x = rng.uniform(0.0, size - 1.0), y = rng.uniform(0.0, size - 1.0);
    const int vertices = rng.uniform_int(spec.vertices.lo, spec.vertices.hi);
    for (int v = 0; v < vertices; ++v) {
      const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double len = rng.uniform(spec.segment_length.lo, spec.segment_length.hi) * size;
      const double nx = std::clamp(x + len * std::cos(angle), 0.0, size - 1.0);
      const double ny = std::clamp(y + len * std::sin(angle), 0.0, size - 1.0);
      draw_capsule(m, x, y, nx, ny, thickness / 2.0);
      x = nx;
      y = ny;
    }
  }
  const int rects = rng.uniform_int(spec.rectangles.lo, spec.rectangles.hi);
  for (int k = 0; k < rects; ++k) {
    const int w = std::max(1, static_cast<int>(std::lround(rng.uniform(spec.rect_size.lo, spec.rect_size.hi) * size)));
    const int h = std::max(1, static_cast<int>(std::lround(rng.uniform(spec.rect_size.lo, spec.rect_size.hi) * size)));
    const int r0 = rng.uniform_int(0, std::max(0, size - h));
    const int c0 = rng.uniform_int(0, std::max(0, size - w));
    for (int r = r0; r < std::min(size, r0 + h); ++r)
      for (int c = c0; c < std::min(size, c0 + w); ++c) m(r, c) = 1;
  }
  return m;
}

std::string describe(const MaskSpec& s) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s(strokes=%d-%d,thick=%d-%d,rects=%d-%d,frac=%.3g-%.3g)",
                std::string(mask_kind_name(s.kind)).c_str(), s.strokes.lo, s.strokes.hi, s.thickness.lo,
                s.thickness.hi, s.rectangles.lo, s.rectangles.hi, s.lo, s.hi);
  return buf;
}

void check_same_size(const Sample& sample, const BinaryMap& m) {
  if (m.height() != sample.parts.height() || m.width() != sample.parts.width())
    throw ShapeError("mask and sample differ in size");
}

}  // namespace

std::string_view side_name(Side side) { return side == Side::kLeft ? "left" : "right"; }

Side side_from_name(std::string_view name) {
  if (name == "left") return Side::kLeft;
  if (name == "right") return Side::kRight;
  throw ParameterError("unknown side '" + std::string(name) + "'");
}

std::string_view mask_kind_name(MaskKind kind) {
  switch (kind) {
    case MaskKind::kAggressive: return "aggressive";
    case MaskKind::kNarrow: return "narrow";
    case MaskKind::kMedium: return "medium";
    case MaskKind::kWide: return "wide";
  }
  return "unknown";
}

MaskKind mask_kind_from_name(std::string_view name) {
  for (MaskKind k : {MaskKind::kAggressive, MaskKind::kNarrow, MaskKind::kMedium, MaskKind::kWide})
    if (mask_kind_name(k) == name) return k;
  throw ParameterError("unknown mask preset '" + std::string(name) + "'");
}

void MaskSpec::validate() const {
  if (!(lo >= 0.0 && lo < hi && hi <= 0.9)) throw ParameterError("MaskSpec: need 0 <= lo < hi <= 0.9");
  auto ordered = [](IntRange r) { return r.lo >= 0 && r.lo <= r.hi; };
  if (!ordered(strokes) || !ordered(thickness) || !ordered(rectangles) || !ordered(vertices))
    throw ParameterError("MaskSpec: integer range out of order");
  if (!(rect_size.lo >= 0 && rect_size.lo <= rect_size.hi && segment_length.lo >= 0 &&
        segment_length.lo <= segment_length.hi))
    throw ParameterError("MaskSpec: real range out of order");
  if (max_retries < 1) throw ParameterError("MaskSpec: max_retries must be positive");
}

MaskSpec MaskSpec::preset(MaskKind kind) {
  MaskSpec s;
  s.kind = kind;
  switch (kind) {
    case MaskKind::kNarrow:
      s.strokes = {1, 4};
      s.thickness = {2, 6};
      s.rectangles = {0, 0};
      s.vertices = {2, 5};
      s.lo = 0.02;
      s.hi = 0.15;
      break;
    case MaskKind::kMedium:
      s.strokes = {2, 6};
      s.thickness = {6, 14};
      s.rectangles = {0, 2};
      s.rect_size = {0.10, 0.25};
      s.vertices = {1, 3};
      s.lo = 0.10;
      s.hi = 0.35;
      break;
    case MaskKind::kWide:
      s.strokes = {3, 8};
      s.thickness = {10, 20};
      s.rectangles = {1, 3};
      s.rect_size = {0.15, 0.35};
      s.vertices = {1, 3};
      s.lo = 0.25;
      s.hi = 0.55;
      break;
    case MaskKind::kAggressive:
      s.lo = 0.02;
      s.hi = 0.55;
      break;
  }
  return s;
}

Mask random_mask(const MaskSpec& spec, std::uint64_t seed, int size) {
  spec.validate();
  if (size < 1) throw ParameterError("random_mask: size must be positive");
  if (spec.kind == MaskKind::kAggressive) {
    Rng pick = Rng::derive(seed, {0xA66u});
    const MaskKind chosen = static_cast<MaskKind>(1 + pick.uniform_int(0, 2));
    Mask m = random_mask(MaskSpec::preset(chosen), seed, size);
    m.spec_tag = "aggressive/" + m.spec_tag;
    return m;
  }
  double closest = -1.0;
  for (int attempt = 0; attempt < spec.max_retries; ++attempt) {
    Rng rng = Rng::derive(seed, {static_cast<std::uint64_t>(attempt)});
    BinaryMap grid = sample_free_form(spec, rng, size);
    const double frac = static_cast<double>(count_set(grid)) / static_cast<double>(grid.size());
    if (frac >= spec.lo && frac <= spec.hi)
      return Mask{std::move(grid), describe(spec) + "@seed=" + std::to_string(seed)};
    const double miss = frac < spec.lo ? spec.lo - frac : frac - spec.hi;
    const double best_miss = closest < 0 ? 2.0 : (closest < spec.lo ? spec.lo - closest : closest - spec.hi);
    if (miss < best_miss) closest = frac;
  }
  throw GenerationError("random_mask: no sample within [" + std::to_string(spec.lo) + ", " + std::to_string(spec.hi) +
                            "] after " + std::to_string(spec.max_retries) + " attempts; closest fraction " +
                            std::to_string(closest),
                        closest);
}

BinaryMap half_plane(int height, int width, int midline, Side side) {
  BinaryMap m(height, width, 0);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      m(r, c) = (side == Side::kLeft ? c <= midline : c >= midline) ? 1 : 0;
  return m;
}

BinaryMap dilate(const BinaryMap& map, int radius) {
  if (radius <= 0) return map;
  const int h = map.height(), w = map.width();
  BinaryMap rows(h, w, 0), out(h, w, 0);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (map(r, c))
        for (int k = std::max(0, c - radius); k <= std::min(w - 1, c + radius); ++k) rows(r, k) = 1;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (rows(r, c))
        for (int k = std::max(0, r - radius); k <= std::min(h - 1, r + radius); ++k) out(k, c) = 1;
  return out;
}

namespace {

// Labels 4-connected components; returns the label plane (0 = unset) and count.
std::pair<Plane<int>, int> label_components(const BinaryMap& map) {
  Plane<int> labels(map.height(), map.width(), 0);
  int next = 0;
  std::vector<std::pair<int, int>> stack;
  for (int r = 0; r < map.height(); ++r)
    for (int c = 0; c < map.width(); ++c) {
      if (!map(r, c) || labels(r, c)) continue;
      labels(r, c) = ++next;
      stack.emplace_back(r, c);
      while (!stack.empty()) {
        auto [y, x] = stack.back();
        stack.pop_back();
        const int ny[4] = {y - 1, y + 1, y, y};
        const int nx[4] = {x, x, x - 1, x + 1};
        for (int k = 0; k < 4; ++k)
          if (map.contains(ny[k], nx[k]) && map(ny[k], nx[k]) && !labels(ny[k], nx[k])) {
            labels(ny[k], nx[k]) = next;
            stack.emplace_back(ny[k], nx[k]);
          }
      }
    }
  return {std::move(labels), next};
}

}  // namespace

int component_count(const BinaryMap& map) { return label_components(map).second; }

Mask organ_mask(const Sample& sample, Part organ, Side side) {
  if (organ == Part::kBackground) throw ParameterError("organ_mask: background is not an organ");
  const int h = sample.parts.height(), w = sample.parts.width(), m = sample.midline_x;
  BinaryMap on_side = sample.parts.mask(organ);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (side == Side::kLeft ? c >= m : c <= m) on_side(r, c) = 0;

  auto [labels, count] = label_components(on_side);
  if (count == 0)
    throw OrganNotFoundError("no " + std::string(part_name(organ)) + " component on the " +
                             std::string(side_name(side)) + " of the midline");
  std::vector<int> area(count + 1, 0);
  for (int v : labels.data()) ++area[v];
  int best = 1;
  for (int k = 2; k <= count; ++k)
    if (area[k] > area[best]) best = k;

  int r0 = h, r1 = -1, c0 = w, c1 = -1;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (labels(r, c) == best) {
        r0 = std::min(r0, r);
        r1 = std::max(r1, r);
        c0 = std::min(c0, c);
        c1 = std::max(c1, c);
      }
  constexpr int kMargin = 2;
  Mask out{BinaryMap(h, w, 0), "organ(" + std::string(part_name(organ)) + "," + std::string(side_name(side)) + ")"};
  for (int r = std::max(0, r0 - kMargin); r <= std::min(h - 1, r1 + kMargin); ++r)
    for (int c = std::max(0, c0 - kMargin); c <= std::min(w - 1, c1 + kMargin); ++c) out.grid(r, c) = 1;
  return out;
}

Mask half_face_mask(const Sample& sample, Side side) {
  const int h = sample.parts.height(), w = sample.parts.width();
  Mask out{intersection_of(sample.parts.face(), half_plane(h, w, sample.midline_x, side)),
           "half_face(" + std::string(side_name(side)) + ")"};
  return out;
}

Mask grow_mask(const Mask& mask, int steps, const Sample& sample) {
  if (steps < 0) throw ParameterError("grow_mask: steps must be >= 0");
  check_same_size(sample, mask.grid);
  if (steps == 0) return mask;

  double sum_c = 0.0;
  std::size_t n = 0;
  for (int r = 0; r < mask.height(); ++r)
    for (int c = 0; c < mask.width(); ++c)
      if (mask.grid(r, c)) {
        sum_c += c;
        ++n;
      }
  if (n == 0) return mask;
  const Side side = sum_c / static_cast<double>(n) < sample.midline_x ? Side::kLeft : Side::kRight;
  const BinaryMap region = half_face_mask(sample, side).grid;
  Mask out{union_of(mask.grid, intersection_of(dilate(mask.grid, steps), region)),
           mask.spec_tag + "+grow(" + std::to_string(steps) + ")"};
  return out;
}

Mask block_mask(int i, int j, int K, int size) {
  if (K <= 0 || size <= 0 || size % K != 0)
    throw ParameterError("block_mask: K=" + std::to_string(K) + " does not tile size " + std::to_string(size));
  const int tiles = size / K;
  if (i < 0 || j < 0 || i >= tiles || j >= tiles)
    throw ParameterError("block_mask: tile (" + std::to_string(i) + "," + std::to_string(j) + ") outside the " +
                         std::to_string(tiles) + "x" + std::to_string(tiles) + " grid");
  Mask out{BinaryMap(size, size, 0), "block(" + std::to_string(i) + "," + std::to_string(j) + ",K=" +
                                         std::to_string(K) + ")"};
  for (int r = i * K; r < (i + 1) * K; ++r)
    for (int c = j * K; c < (j + 1) * K; ++c) out.grid(r, c) = 1;
  return out;
}

void write_mask(const std::filesystem::path& path, const BinaryMap& mask) {
  Plane<std::uint8_t> bytes(mask.height(), mask.width());
  for (std::size_t i = 0; i < mask.size(); ++i) bytes.data()[i] = mask.data()[i] ? 255 : 0;
  png::write_gray(path, bytes);
}

BinaryMap read_mask(const std::filesystem::path& path) {
  const Image img = png::read_rgb(path);
  BinaryMap out(img.height(), img.width(), 0);
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) out(r, c) = img.at(r, c, 0) >= 0.5f ? 1 : 0;
  return out;
}

}  // namespace symface

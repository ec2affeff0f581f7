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

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "symface/errors.hpp"

namespace symface {

/// Row-major 2-D grid.
template <typename T>
class Plane {
 public:
  Plane() = default;
  Plane(int height, int width, T fill = T{})
      : height_(height), width_(width), data_(static_cast<std::size_t>(height) * width, fill) {
    if (height < 0 || width < 0) throw ShapeError("Plane: negative dimensions");
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * width_ + c]; }
  const T& operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * width_ + c]; }

  bool contains(int r, int c) const { return r >= 0 && c >= 0 && r < height_ && c < width_; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  bool operator==(const Plane&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

/// {0,1}-valued map. For masks, 1 marks a hole.
using BinaryMap = Plane<std::uint8_t>;

/// Interleaved H x W x C image with float samples, nominally in [0, 1].
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels = 3, float fill = 0.0f)
      : height_(height), width_(width), channels_(channels),
        data_(static_cast<std::size_t>(height) * width * channels, fill) {}

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }

  float& at(int r, int c, int ch) {
    return data_[(static_cast<std::size_t>(r) * width_ + c) * channels_ + ch];
  }
  float at(int r, int c, int ch) const {
    return data_[(static_cast<std::size_t>(r) * width_ + c) * channels_ + ch];
  }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  bool same_shape(const Image& o) const {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }

  bool operator==(const Image&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Column reflection c -> 2*midline - c. Columns whose mirror falls outside
/// the grid map onto themselves.
inline int mirror_column(int c, int midline, int width) {
  const int m = 2 * midline - c;
  return (m >= 0 && m < width) ? m : c;
}

template <typename T>
Plane<T> reflect(const Plane<T>& p, int midline) {
  Plane<T> out(p.height(), p.width());
  for (int r = 0; r < p.height(); ++r)
    for (int c = 0; c < p.width(); ++c) out(r, c) = p(r, mirror_column(c, midline, p.width()));
  return out;
}

inline Image reflect(const Image& img, int midline) {
  Image out(img.height(), img.width(), img.channels());
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) {
      const int src = mirror_column(c, midline, img.width());
      for (int ch = 0; ch < img.channels(); ++ch) out.at(r, c, ch) = img.at(r, src, ch);
    }
  return out;
}

inline std::size_t count_set(const BinaryMap& m) {
  return static_cast<std::size_t>(std::count_if(m.data().begin(), m.data().end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

inline BinaryMap union_of(const BinaryMap& a, const BinaryMap& b) {
  if (a.height() != b.height() || a.width() != b.width()) throw ShapeError("union_of: size mismatch");
  BinaryMap out(a.height(), a.width());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = (a.data()[i] | b.data()[i]) ? 1 : 0;
  return out;
}

inline BinaryMap intersection_of(const BinaryMap& a, const BinaryMap& b) {
  if (a.height() != b.height() || a.width() != b.width())
    throw ShapeError("intersection_of: size mismatch");
  BinaryMap out(a.height(), a.width());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = (a.data()[i] && b.data()[i]) ? 1 : 0;
  return out;
}

inline bool is_subset(const BinaryMap& a, const BinaryMap& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.data()[i] && !b.data()[i]) return false;
  return true;
}

inline bool overlaps(const BinaryMap& a, const BinaryMap& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.data()[i] && b.data()[i]) return true;
  return false;
}

/// Holes set to zero: image * (1 - mask), broadcast over channels.
inline Image zero_fill(const Image& img, const BinaryMap& mask) {
  if (img.height() != mask.height() || img.width() != mask.width())
    throw ShapeError("zero_fill: mask does not match image");
  Image out = img;
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c)
      if (mask(r, c))
        for (int ch = 0; ch < img.channels(); ++ch) out.at(r, c, ch) = 0.0f;
  return out;
}

}  // namespace symface

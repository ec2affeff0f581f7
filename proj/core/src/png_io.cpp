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

#include "symface/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>

namespace symface::png {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

void write_rows(const std::filesystem::path& path, int height, int width, int color_type,
                std::span<const std::uint8_t> bytes, int row_stride,
                std::span<const Rgb8> palette = {}) {
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng: out of memory writing " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng: failed writing " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  std::vector<png_color> pal;
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    for (const Rgb8& c : palette) pal.push_back(png_color{c[0], c[1], c[2]});
    png_set_PLTE(png, info, pal.data(), static_cast<int>(pal.size()));
  }
  png_write_info(png, info);
  for (int r = 0; r < height; ++r)
    png_write_row(png, const_cast<png_bytep>(bytes.data() + static_cast<std::size_t>(r) * row_stride));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

struct Decoded {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> bytes;
};

// expand_palette=false keeps palette indices as raw bytes.
Decoded decode(const std::filesystem::path& path, bool expand_palette) {
  FilePtr f = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw IoError("not a PNG file: " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng: out of memory reading " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng: corrupt file " + path.string());
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) {
    if (expand_palette) {
      png_set_palette_to_rgb(png);
    } else if (depth < 8) {
      png_set_packing(png);
    }
  }
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);

  Decoded out;
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  out.bytes.resize(row_bytes * out.height);
  std::vector<png_bytep> rows(out.height);
  for (int r = 0; r < out.height; ++r) rows[r] = out.bytes.data() + row_bytes * r;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

std::uint8_t quantize(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

}  // namespace

void write_rgb(const std::filesystem::path& path, const Image& image) {
  if (image.channels() != 3) throw ShapeError("write_rgb: expected 3 channels");
  std::vector<std::uint8_t> bytes(image.data().size());
  std::transform(image.data().begin(), image.data().end(), bytes.begin(), quantize);
  write_rows(path, image.height(), image.width(), PNG_COLOR_TYPE_RGB, bytes, image.width() * 3);
}

Image read_rgb(const std::filesystem::path& path) {
  const Decoded d = decode(path, /*expand_palette=*/true);
  Image img(d.height, d.width, 3);
  for (int r = 0; r < d.height; ++r)
    for (int c = 0; c < d.width; ++c) {
      const std::uint8_t* px = d.bytes.data() + (static_cast<std::size_t>(r) * d.width + c) * d.channels;
      for (int ch = 0; ch < 3; ++ch) {
        const std::uint8_t v = d.channels >= 3 ? px[ch] : px[0];
        img.at(r, c, ch) = static_cast<float>(v) / 255.0f;
      }
    }
  return img;
}

void write_rgb8(const std::filesystem::path& path, int height, int width,
                std::span<const std::uint8_t> rgb) {
  if (rgb.size() != static_cast<std::size_t>(height) * width * 3)
    throw ShapeError("write_rgb8: byte count does not match dimensions");
  write_rows(path, height, width, PNG_COLOR_TYPE_RGB, rgb, width * 3);
}

void write_gray(const std::filesystem::path& path, const Plane<std::uint8_t>& plane) {
  write_rows(path, plane.height(), plane.width(), PNG_COLOR_TYPE_GRAY, plane.data(), plane.width());
}

void write_indexed(const std::filesystem::path& path, const Plane<std::uint8_t>& indices,
                   std::span<const Rgb8> palette) {
  for (std::uint8_t v : indices.data())
    if (v >= palette.size()) throw ParameterError("write_indexed: index outside palette");
  write_rows(path, indices.height(), indices.width(), PNG_COLOR_TYPE_PALETTE, indices.data(),
             indices.width(), palette);
}

Plane<std::uint8_t> read_codes(const std::filesystem::path& path) {
  const Decoded d = decode(path, /*expand_palette=*/false);
  if (d.channels != 1) throw IoError("expected a single-channel indexed image: " + path.string());
  Plane<std::uint8_t> out(d.height, d.width);
  std::copy(d.bytes.begin(), d.bytes.end(), out.data().begin());
  return out;
}

}  // namespace symface::png

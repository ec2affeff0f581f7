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

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "symface/grid.hpp"

namespace symface::png {

using Rgb8 = std::array<std::uint8_t, 3>;

/// 8-bit RGB; samples are clamped to [0,1] and rounded to the nearest level.
void write_rgb(const std::filesystem::path& path, const Image& image);

/// Reads gray, gray+alpha, RGB or RGBA 8/16-bit files as a 3-channel image.
Image read_rgb(const std::filesystem::path& path);

/// Raw 8-bit bytes, interleaved RGB.
void write_rgb8(const std::filesystem::path& path, int height, int width,
                std::span<const std::uint8_t> rgb);

/// Single-channel 8-bit grayscale, values written verbatim.
void write_gray(const std::filesystem::path& path, const Plane<std::uint8_t>& plane);

/// Palette image; each entry of `indices` must address `palette`.
void write_indexed(const std::filesystem::path& path, const Plane<std::uint8_t>& indices,
                   std::span<const Rgb8> palette);

/// Raw per-pixel codes from an 8-bit palette or 8-bit grayscale file.
/// Any other pixel format is an IoError.
Plane<std::uint8_t> read_codes(const std::filesystem::path& path);

}  // namespace symface::png

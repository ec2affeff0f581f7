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

#include "symface/segmentation.hpp"

#include <cstdlib>
#include <mutex>

#include <unistd.h>

#include "symface/errors.hpp"
#include "symface/png_io.hpp"

namespace symface {
namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

// One external call at a time per process; the scratch file names are reused.
std::mutex& external_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

Segmenter Segmenter::external(std::string command, std::filesystem::path scratch_dir) {
  if (command.empty()) throw ParameterError("external segmenter: empty command");
  Segmenter s(Mode::kExternal, std::move(command));
  s.scratch_ = scratch_dir.empty() ? std::filesystem::temp_directory_path() : std::move(scratch_dir);
  return s;
}

PartMaskSet Segmenter::segment(const Sample& sample) const {
  if (mode_ == Mode::kOracle) return sample.parts;
  return segment(sample.image);
}

PartMaskSet Segmenter::segment(const Image& image) const {
  if (mode_ == Mode::kOracle) throw SegmentationError("oracle segmenter needs a Sample with ground-truth parts");
  std::lock_guard lock(external_mutex());
  const std::string stem = "symface_seg_" + std::to_string(::getpid());
  const auto in = scratch_ / (stem + "_in.png");
  const auto out = scratch_ / (stem + "_out.png");
  std::filesystem::remove(out);
  png::write_rgb(in, image);
  const std::string cmd = command_ + " " + shell_quote(in.string()) + " " + shell_quote(out.string());
  const int status = std::system(cmd.c_str());
  std::filesystem::remove(in);
  if (status != 0) throw SegmentationError("external segmenter failed (status " + std::to_string(status) + "): " + command_);

  Plane<std::uint8_t> codes;
  try {
    codes = png::read_codes(out);
  } catch (const Error& e) {
    throw SegmentationError(std::string("external segmenter output unreadable: ") + e.what());
  }
  std::filesystem::remove(out);
  if (codes.height() != image.height() || codes.width() != image.width())
    throw SegmentationError("external segmenter output has the wrong size");
  for (std::uint8_t c : codes.data())
    if (c >= kPartCodeCount)
      throw SegmentationError("external segmenter emitted palette code " + std::to_string(c) + " (valid: 0-6)");
  return PartMaskSet(std::move(codes));
}

}  // namespace symface

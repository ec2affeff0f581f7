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

// Frozen part segmentation. Results are plain label planes, so nothing
// downstream can backpropagate into them.

#pragma once

#include <filesystem>
#include <string>

#include "symface/toyfaces.hpp"

namespace symface {

class Segmenter {
 public:
  enum class Mode { kOracle, kExternal };

  static Segmenter oracle() { return Segmenter(Mode::kOracle, {}); }
  /// `command` is run as `<command> <input.png> <output.png>` through the shell.
  static Segmenter external(std::string command, std::filesystem::path scratch_dir = {});

  Mode mode() const { return mode_; }
  const std::string& command() const { return command_; }

  /// Oracle: the sample's own labels. External: segments sample.image.
  PartMaskSet segment(const Sample& sample) const;
  /// External mode only; throws SegmentationError in oracle mode.
  PartMaskSet segment(const Image& image) const;

 private:
  Segmenter(Mode mode, std::string command) : mode_(mode), command_(std::move(command)) {}

  Mode mode_;
  std::string command_;
  std::filesystem::path scratch_;
};

}  // namespace symface

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

// Single-file checkpoints:
//   "SYMFACE\0" | u32 format_version | u64 header bytes | JSON header | arrays
// Arrays are little-endian f32 or f64 (the header's dtype), concatenated in
// header order.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "symface/generator.hpp"
#include "symface/discriminators.hpp"

namespace symface {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;
};

enum class DType { kF32, kF64 };

struct Checkpoint {
  std::uint32_t format_version = kCheckpointVersion;
  DType dtype = DType::kF32;
  SwinConfig swin;
  DiscConfig disc;
  /// Free-form JSON object for the trainer (step count, config text...).
  std::string state_json = "{}";
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const;
  /// Throws IntegrityError when absent.
  const NamedArray& at(const std::string& name) const;
};

/// Written to a temporary file and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws FormatError for a bad magic or unknown format_version, IoError when unreadable.
Checkpoint load_checkpoint(const std::filesystem::path& path);

template <typename T>
void append_parameters(Checkpoint& ckpt, const nn::ParameterSet<T>& params);

/// Copies every parameter of `params` from the checkpoint (names and shapes
/// must match).
template <typename T>
void restore_parameters(const Checkpoint& ckpt, nn::ParameterSet<T>& params);

/// Builds a generator from the checkpoint's config and "gen.*" arrays.
template <typename T>
Generator<T> load_generator(const Checkpoint& ckpt);

}  // namespace symface

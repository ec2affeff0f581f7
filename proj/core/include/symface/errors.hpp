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

#include <stdexcept>
#include <string>

namespace symface {

/// Root of every error thrown by the library. The CLI maps the subclasses
/// onto process exit codes (see tools/symface.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument values (sizes, ranges, tile indices).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Tensor or image dimensions that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or an ill-conditioned numeric routine.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Mask sampler could not hit the requested hole fraction.
class GenerationError : public Error {
 public:
  GenerationError(const std::string& what, double achieved_fraction)
      : Error(what), achieved_fraction_(achieved_fraction) {}
  double achieved_fraction() const { return achieved_fraction_; }

 private:
  double achieved_fraction_;
};

class OrganNotFoundError : public Error {
 public:
  using Error::Error;
};

/// Dataset directory does not match its manifest.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class SegmentationError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration (unknown key, bad value, empty dataset).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint with a format version this build does not understand.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace symface

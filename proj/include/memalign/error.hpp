// Copyright 2026 The memalign Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MEMALIGN_ERROR_HPP_
#define MEMALIGN_ERROR_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace memalign {

// Base class for every error raised by the library. The CLI maps each
// subclass onto exactly one process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration value or argument (exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Shape disagreement between operands (exit code 1).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Scalar argument outside its admissible interval (exit code 1).
class RangeError : public Error {
 public:
  using Error::Error;
};

// Malformed binary or text input. Carries the byte offset where parsing
// stopped (exit code 1).
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

// NaN, divergence or a failed numerical check (exit code 2).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Filesystem failure (exit code 3).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace memalign

#endif  // MEMALIGN_ERROR_HPP_

// Copyright 2026 The qdet Authors.
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

#ifndef QDET_ERRORS_HPP_
#define QDET_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace qdet {

// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape / dimension mismatches. Messages name the offending shapes.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// Violated operation precondition (non-scalar loss, degenerate mask,
// empty example list, ...).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& msg) : Error(msg) {}
};

// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Malformed on-disk data: record files, WAV headers, model archives.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// Bad runtime input to a model or feature pipeline (missing modality,
// out-of-vocabulary id, signal shorter than one frame).
class InputError : public Error {
 public:
  explicit InputError(const std::string& msg) : Error(msg) {}
};

}  // namespace qdet

#endif  // QDET_ERRORS_HPP_

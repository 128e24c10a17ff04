// Copyright 2026 The ctxhourglass Authors
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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ctxh {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not fit an operation, or sizes that overflow.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition (bad index, non-scalar loss...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Malformed data: labels out of range, dots outside the image.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Files that cannot be read as images or annotations.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration. `field` names the offending key ("train.phase1.patience").
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Corrupt or unsupported checkpoint file; carries the byte offset of the failure.
class FormatError : public Error {
 public:
  FormatError(std::size_t offset, const std::string& message)
      : Error(message + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// NaN or infinity encountered during optimization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace ctxh

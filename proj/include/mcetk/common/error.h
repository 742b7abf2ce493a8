// Copyright 2026 The mcetk Authors
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
#include <string_view>

namespace mcetk {

// Error categories. The CLI maps each category onto an exit status:
// usage/config/parse/range/validation/undefined-basis -> 1, io/backend -> 2.
enum class ErrorKind {
  kUsage,
  kConfig,
  kParse,
  kRange,
  kValidation,
  kUndefinedBasis,
  kIo,
  kBackend,
};

std::string_view ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& m) : Error(ErrorKind::kUsage, m) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error(ErrorKind::kConfig, m) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& m) : Error(ErrorKind::kParse, m) {}
};

class RangeError : public Error {
 public:
  explicit RangeError(const std::string& m) : Error(ErrorKind::kRange, m) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& m)
      : Error(ErrorKind::kValidation, m) {}
};

class UndefinedBasisError : public Error {
 public:
  explicit UndefinedBasisError(const std::string& m)
      : Error(ErrorKind::kUndefinedBasis, m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error(ErrorKind::kIo, m) {}
};

class BackendError : public Error {
 public:
  explicit BackendError(const std::string& m) : Error(ErrorKind::kBackend, m) {}
};

}  // namespace mcetk

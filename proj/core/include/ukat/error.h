// Copyright (c) 2026 The ukat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef UKAT_ERROR_H_
#define UKAT_ERROR_H_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ukat {

// Broad failure classes. The CLI maps them onto exit codes.
enum class ErrorKind {
  kArgument,   // bad caller-supplied value
  kEmptyInput,
  kShape,
  kNumeric,    // NaN / Inf encountered
  kFormat,     // malformed file contents
  kIo,
  kVocabulary,
  kCollision,
  kEncoding,
  kConfig,
  kState,
};

const char* ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Raised while decoding a binary or text file. `offset` is a byte offset for
// binary formats and a 1-based line number for line-oriented ones.
class FormatError : public Error {
 public:
  FormatError(const std::string& message, std::uint64_t offset)
      : Error(ErrorKind::kFormat,
              message + " (at offset " + std::to_string(offset) + ")"),
        detail_(message),
        offset_(offset) {}

  std::uint64_t offset() const { return offset_; }
  const std::string& detail() const { return detail_; }

  // Same error with `context` (usually a path) prepended to the message.
  FormatError WithContext(const std::string& context) const {
    return FormatError(context + ": " + detail_, offset_);
  }

 private:
  std::string detail_;
  std::uint64_t offset_;
};

[[noreturn]] inline void Fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void Require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) Fail(kind, message);
}

}  // namespace ukat

#endif  // UKAT_ERROR_H_

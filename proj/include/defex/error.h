// Copyright 2026 The defex Authors.
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

#ifndef DEFEX_ERROR_H_
#define DEFEX_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace defex {

// Error categories. The CLI maps each category onto a process exit code.
enum class ErrorKind {
  kParse,          // malformed input record
  kValidation,     // record violates a type invariant
  kArgument,       // bad argument to an operation
  kConfiguration,  // inconsistent configuration (e.g. nothing to train)
  kInputNotFound,  // referenced input path does not exist
  kIo,             // read/write failure
  kNumerical,      // non-finite loss or similar
  kFingerprint,    // stale definition index or checkpoint mismatch
  kTruncation,     // sequence longer than the encoder accepts
  kDegenerate,     // e.g. cosine of a zero vector
  kInternal,
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

[[noreturn]] inline void Fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace defex

#endif  // DEFEX_ERROR_H_

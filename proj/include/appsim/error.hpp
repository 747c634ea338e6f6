// Copyright 2026 The appsim Authors.
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

namespace appsim {

// Failure categories. The CLI maps kValidation/kUsage to exit code 1 and
// everything else to exit code 2.
enum class ErrorKind {
  kIo,
  kFormat,
  kCorruption,
  kParse,
  kValidation,
  kUsage,
  kShape,
  kConfiguration,
  kInference,
  kDecode,
  kDomain,
  kRange,
  kTraining,
  kEmptyResult,
  kNoKnee,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo: return "io error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kCorruption: return "corruption error";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kUsage: return "usage error";
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kConfiguration: return "configuration error";
    case ErrorKind::kInference: return "inference error";
    case ErrorKind::kDecode: return "decode error";
    case ErrorKind::kDomain: return "domain error";
    case ErrorKind::kRange: return "range error";
    case ErrorKind::kTraining: return "training error";
    case ErrorKind::kEmptyResult: return "empty result";
    case ErrorKind::kNoKnee: return "no knee";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  bool is_validation() const noexcept {
    return kind_ == ErrorKind::kValidation || kind_ == ErrorKind::kUsage ||
           kind_ == ErrorKind::kParse || kind_ == ErrorKind::kConfiguration;
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace appsim

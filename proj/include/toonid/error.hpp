// Copyright 2026 The ToonID Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
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

namespace toonid {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kZeroVector,
  kDegenerate,
  kEmptyInput,
  kParse,
  kValidation,
  kDanglingReference,
  kNonFinite,
  kTransport,
  kMalformedResponse,
  kIo,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kZeroVector: return "zero_vector";
    case ErrorCode::kDegenerate: return "degenerate";
    case ErrorCode::kEmptyInput: return "empty_input";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kValidation: return "validation_error";
    case ErrorCode::kDanglingReference: return "dangling_reference";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kTransport: return "transport_error";
    case ErrorCode::kMalformedResponse: return "malformed_response";
    case ErrorCode::kIo: return "io_error";
  }
  return "unknown";
}

// Structured error carried by every failing operation. `path` names the
// offending file, field or record when one exists.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string path = {})
      : std::runtime_error(std::move(message)), code_(code), path_(std::move(path)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& path() const noexcept { return path_; }

 private:
  ErrorCode code_;
  std::string path_;
};

}  // namespace toonid

/* Copyright 2026 The lpstain Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lpstain {

enum class ErrorCode {
  kDimsTooSmall,
  kDimMismatch,
  kLevelOutOfRange,
  kEmptyDataset,
  kUnreadableImage,
  kDegenerateScale,
  kShapeMismatch,
  kDegenerateChannel,
  kNonpositiveBeta,
  kWeightShapeMismatch,
  kRangeError,
  kInsufficientTissue,
  kDegenerateCloud,
  kBadMagic,
  kTruncatedPayload,
  kUnknownModelKind,
  kBadSidecar,
  kIo,
};

std::string_view error_name(ErrorCode code);

// Every library failure is reported through this type; `code()` is stable,
// `what()` carries the human-readable detail (file names, tensor names).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(error_name(code)) + ": " + detail),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) {
  throw Error(code, detail);
}

inline std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimsTooSmall: return "DimsTooSmall";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kLevelOutOfRange: return "LevelOutOfRange";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kUnreadableImage: return "UnreadableImage";
    case ErrorCode::kDegenerateScale: return "DegenerateScale";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kDegenerateChannel: return "DegenerateChannel";
    case ErrorCode::kNonpositiveBeta: return "NonpositiveBeta";
    case ErrorCode::kWeightShapeMismatch: return "WeightShapeMismatch";
    case ErrorCode::kRangeError: return "RangeError";
    case ErrorCode::kInsufficientTissue: return "InsufficientTissue";
    case ErrorCode::kDegenerateCloud: return "DegenerateCloud";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kTruncatedPayload: return "TruncatedPayload";
    case ErrorCode::kUnknownModelKind: return "UnknownModelKind";
    case ErrorCode::kBadSidecar: return "BadSidecar";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

}  // namespace lpstain

// Copyright 2026 The aucf Authors. All rights reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
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

namespace aucf {

enum class ErrorCode {
  // input / dataset
  Unreadable,
  MalformedLine,
  EmptyInput,
  EmptyAfterFiltering,
  InvalidRatios,
  InsufficientData,
  NothingToEvaluate,
  NoNegativeAvailable,
  // shapes and ids
  OutOfRange,
  ShapeMismatch,
  // numerics
  DegenerateEmbedding,
  InsufficientBatch,
  DivergedGradient,
  // configuration
  InvalidConfig,
  Unwritable,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Unreadable: return "Unreadable";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptyAfterFiltering: return "EmptyAfterFiltering";
    case ErrorCode::InvalidRatios: return "InvalidRatios";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::NothingToEvaluate: return "NothingToEvaluate";
    case ErrorCode::NoNegativeAvailable: return "NoNegativeAvailable";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DegenerateEmbedding: return "DegenerateEmbedding";
    case ErrorCode::InsufficientBatch: return "InsufficientBatch";
    case ErrorCode::DivergedGradient: return "DivergedGradient";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Unwritable: return "Unwritable";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace aucf

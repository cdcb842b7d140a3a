// Copyright 2026 The ivgp Authors
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

#ifndef IVGP_ERRORS_HPP_
#define IVGP_ERRORS_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace ivgp {

enum class ErrorCode {
  NotPositiveDefinite,
  NonSquare,
  AsymmetricInput,
  ZeroDiagonal,
  DimensionMismatch,
  ShapeMismatch,
  UnsupportedMode,
  UnsupportedCombination,
  PatchLargerThanImage,
  DuplicateRegistration,
  AmbiguityDetected,
  NoImplementation,
  RegistryFrozen,
  EmptySubset,
  NonFiniteObjective,
  InvalidParameter,
  ParseError,
  DataError,
};

std::string_view error_name(ErrorCode code);

// Every library failure is an ivgp::Error; the code names the failure class
// and is what the CLI reports on numerical errors.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }
  std::string_view name() const { return error_name(code_); }

  bool is_numerical() const {
    return code_ == ErrorCode::NotPositiveDefinite ||
           code_ == ErrorCode::ZeroDiagonal ||
           code_ == ErrorCode::AsymmetricInput ||
           code_ == ErrorCode::NonFiniteObjective;
  }

private:
  ErrorCode code_;
};

inline std::string_view error_name(ErrorCode code) {
  switch (code) {
  case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
  case ErrorCode::NonSquare: return "NonSquare";
  case ErrorCode::AsymmetricInput: return "AsymmetricInput";
  case ErrorCode::ZeroDiagonal: return "ZeroDiagonal";
  case ErrorCode::DimensionMismatch: return "DimensionMismatch";
  case ErrorCode::ShapeMismatch: return "ShapeMismatch";
  case ErrorCode::UnsupportedMode: return "UnsupportedMode";
  case ErrorCode::UnsupportedCombination: return "UnsupportedCombination";
  case ErrorCode::PatchLargerThanImage: return "PatchLargerThanImage";
  case ErrorCode::DuplicateRegistration: return "DuplicateRegistration";
  case ErrorCode::AmbiguityDetected: return "AmbiguityDetected";
  case ErrorCode::NoImplementation: return "NoImplementation";
  case ErrorCode::RegistryFrozen: return "RegistryFrozen";
  case ErrorCode::EmptySubset: return "EmptySubset";
  case ErrorCode::NonFiniteObjective: return "NonFiniteObjective";
  case ErrorCode::InvalidParameter: return "InvalidParameter";
  case ErrorCode::ParseError: return "ParseError";
  case ErrorCode::DataError: return "DataError";
  }
  return "Unknown";
}

} // namespace ivgp

#endif // IVGP_ERRORS_HPP_

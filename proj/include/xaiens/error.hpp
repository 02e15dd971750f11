// Copyright 2026 The xaiens Authors
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

#ifndef XAIENS_ERROR_HPP
#define XAIENS_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace xaiens {

/// Every failure raised by the library carries one of these codes. The CLI
/// maps them onto process exit codes (see cli/commands.hpp).
enum class Errc {
  // data model
  UnknownMethod,
  EmptyData,
  ValidationError,
  ShapeMismatch,
  // numerics
  DegenerateSpread,
  EmptyList,
  NonFiniteInput,
  SingularSystem,
  DimensionMismatch,
  BudgetExceeded,
  PreconditionViolation,
  // ensembling
  MissingEvidence,
  MissingMasks,
  TooFewInstances,
  // metrics / oracles
  AllZeroAttribution,
  NonPositiveInitialScore,
  SingleClassModel,
  OracleFailure,
  ConfigError,
  // io
  BadMagic,
  UnsupportedVersion,
  MalformedHeader,
  UnsupportedDtype,
  FortranOrderUnsupported,
  TruncatedPayload,
  IoFailure,
  ManifestSchemaError,
};

constexpr std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::UnknownMethod: return "UnknownMethod";
    case Errc::EmptyData: return "EmptyData";
    case Errc::ValidationError: return "ValidationError";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::DegenerateSpread: return "DegenerateSpread";
    case Errc::EmptyList: return "EmptyList";
    case Errc::NonFiniteInput: return "NonFiniteInput";
    case Errc::SingularSystem: return "SingularSystem";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::BudgetExceeded: return "BudgetExceeded";
    case Errc::PreconditionViolation: return "PreconditionViolation";
    case Errc::MissingEvidence: return "MissingEvidence";
    case Errc::MissingMasks: return "MissingMasks";
    case Errc::TooFewInstances: return "TooFewInstances";
    case Errc::AllZeroAttribution: return "AllZeroAttribution";
    case Errc::NonPositiveInitialScore: return "NonPositiveInitialScore";
    case Errc::SingleClassModel: return "SingleClassModel";
    case Errc::OracleFailure: return "OracleFailure";
    case Errc::ConfigError: return "ConfigError";
    case Errc::BadMagic: return "BadMagic";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::MalformedHeader: return "MalformedHeader";
    case Errc::UnsupportedDtype: return "UnsupportedDtype";
    case Errc::FortranOrderUnsupported: return "FortranOrderUnsupported";
    case Errc::TruncatedPayload: return "TruncatedPayload";
    case Errc::IoFailure: return "IoFailure";
    case Errc::ManifestSchemaError: return "ManifestSchemaError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code), detail_(message) {}

  Errc code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace xaiens

#endif  // XAIENS_ERROR_HPP

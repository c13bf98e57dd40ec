/*
 Copyright 2026 The hcs Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hcs {

enum class ErrorCode {
  kNoCrossing,
  kTangentialCrossing,
  kGrazing,
  kDimensionMismatch,
  kZenoGuard,
  kIllConditionedKernel,
  kSingularPhi12,
  kNonpositiveSqrtArgument,
  kSingularPsi12,
  kRiccatiBlowup,
  kPsdViolation,
  kNoninvertibleSaltation,
  kIdentityResidualExceeded,
  kGramianSingular,
  kInfeasibleLogdetDomain,
  kMaxIterations,
  kInfeasible,
  kDiverged,
  kConfig,
  kVerification,
};

/// Stable kebab-case name used in error JSON and messages.
constexpr std::string_view code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNoCrossing: return "no-crossing";
    case ErrorCode::kTangentialCrossing: return "tangential-crossing";
    case ErrorCode::kGrazing: return "grazing";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kZenoGuard: return "zeno-guard";
    case ErrorCode::kIllConditionedKernel: return "ill-conditioned-kernel";
    case ErrorCode::kSingularPhi12: return "singular-phi12";
    case ErrorCode::kNonpositiveSqrtArgument: return "nonpositive-sqrt-argument";
    case ErrorCode::kSingularPsi12: return "singular-psi12";
    case ErrorCode::kRiccatiBlowup: return "riccati-blowup";
    case ErrorCode::kPsdViolation: return "psd-violation";
    case ErrorCode::kNoninvertibleSaltation: return "noninvertible-saltation";
    case ErrorCode::kIdentityResidualExceeded: return "identity-residual-exceeded";
    case ErrorCode::kGramianSingular: return "gramian-singular";
    case ErrorCode::kInfeasibleLogdetDomain: return "infeasible-logdet-domain";
    case ErrorCode::kMaxIterations: return "max-iterations";
    case ErrorCode::kInfeasible: return "infeasible";
    case ErrorCode::kDiverged: return "diverged";
    case ErrorCode::kConfig: return "config-error";
    case ErrorCode::kVerification: return "verification-failure";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(code_name(code)) + ": " + detail),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hcs

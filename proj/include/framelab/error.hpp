// Copyright 2026 The framelab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
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

namespace framelab {

/// Failure categories raised by the library. Each maps to one documented
/// precondition or runtime failure of a public operation.
enum class ErrorKind {
    InvalidArgument,
    GridTooCoarse,
    SupportClipped,
    DuplicateFactorLabel,
    SpaceMismatch,
    CflViolation,
    MissingFactor,
    InvalidBipartition,
    UnnormalizedInput,
    EmptyDecomposition,
    VanishingOverlap,
    InvalidKeepSet,
    DimensionMismatch,
    InteractionNotNegligibleAtStart,
    InteractionNotNegligibleAtEnd,
    ComponentsNotSeparated,
    ConfigParse,
    Validation,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::GridTooCoarse: return "grid-too-coarse";
    case ErrorKind::SupportClipped: return "support-clipped";
    case ErrorKind::DuplicateFactorLabel: return "duplicate-factor-label";
    case ErrorKind::SpaceMismatch: return "space-mismatch";
    case ErrorKind::CflViolation: return "cfl-violation";
    case ErrorKind::MissingFactor: return "missing-factor";
    case ErrorKind::InvalidBipartition: return "invalid-bipartition";
    case ErrorKind::UnnormalizedInput: return "unnormalized-input";
    case ErrorKind::EmptyDecomposition: return "empty-decomposition";
    case ErrorKind::VanishingOverlap: return "vanishing-overlap";
    case ErrorKind::InvalidKeepSet: return "invalid-keep-set";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::InteractionNotNegligibleAtStart: return "interaction-not-negligible-at-start";
    case ErrorKind::InteractionNotNegligibleAtEnd: return "interaction-not-negligible-at-end";
    case ErrorKind::ComponentsNotSeparated: return "components-not-separated";
    case ErrorKind::ConfigParse: return "config-parse-error";
    case ErrorKind::Validation: return "validation-error";
    }
    return "unknown";
}

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string &message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message),
          kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string &message) {
    throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string &message) {
    if (!condition) {
        fail(kind, message);
    }
}

} // namespace framelab

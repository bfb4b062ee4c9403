// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fmcgm {

enum class ErrorCode {
  // causal-graph
  CycleDetected,
  UnknownEndpoint,
  DuplicateId,
  EmptyConceptSet,
  UnknownConcept,
  EmptyNewValue,
  InvalidArgument,
  // vlm-gateway
  TransportError,
  AuthError,
  RetriesExhausted,
  Timeout,
  NoJsonFound,
  MalformedJson,
  MissingField,
  WrongKind,
  EmptyValue,
  // extractor / manipulator
  ExtractionFailed,
  ManipulationFailed,
  DuplicateTargets,
  MissingTargetState,
  // csg-core / backends
  InvalidSteps,
  ShapeMismatch,
  BackendError,
  NonFiniteLatent,
  EmptySpan,
  // evaluation
  EmptyStates,
  SchemaInvalid,
  ServiceUnavailable,
  EmptyInput,
  // pipeline
  DatasetEmpty,
  InsufficientItems,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Single exception type for the whole library. `code()` identifies the
/// failure class; `detail()` carries a machine-usable payload such as a
/// JSON path, an offending text span, or a cycle listing.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string detail = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(std::move(detail)) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }
  [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace fmcgm

// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "fmcgm/error.hpp"

namespace fmcgm {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::UnknownEndpoint: return "UnknownEndpoint";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::EmptyConceptSet: return "EmptyConceptSet";
    case ErrorCode::UnknownConcept: return "UnknownConcept";
    case ErrorCode::EmptyNewValue: return "EmptyNewValue";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::AuthError: return "AuthError";
    case ErrorCode::RetriesExhausted: return "RetriesExhausted";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::NoJsonFound: return "NoJsonFound";
    case ErrorCode::MalformedJson: return "MalformedJson";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::WrongKind: return "WrongKind";
    case ErrorCode::EmptyValue: return "EmptyValue";
    case ErrorCode::ExtractionFailed: return "ExtractionFailed";
    case ErrorCode::ManipulationFailed: return "ManipulationFailed";
    case ErrorCode::DuplicateTargets: return "DuplicateTargets";
    case ErrorCode::MissingTargetState: return "MissingTargetState";
    case ErrorCode::InvalidSteps: return "InvalidSteps";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::BackendError: return "BackendError";
    case ErrorCode::NonFiniteLatent: return "NonFiniteLatent";
    case ErrorCode::EmptySpan: return "EmptySpan";
    case ErrorCode::EmptyStates: return "EmptyStates";
    case ErrorCode::SchemaInvalid: return "SchemaInvalid";
    case ErrorCode::ServiceUnavailable: return "ServiceUnavailable";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DatasetEmpty: return "DatasetEmpty";
    case ErrorCode::InsufficientItems: return "InsufficientItems";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace fmcgm

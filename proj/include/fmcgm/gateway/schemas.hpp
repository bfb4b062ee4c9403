// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <variant>
#include <vector>

#include "fmcgm/eval/verdict.hpp"
#include "fmcgm/graph/concept_graph.hpp"
#include "fmcgm/manipulator/intervention.hpp"
#include "json.hpp"

namespace fmcgm {

/// Raw extractor output; not yet checked for DAG structure.
struct ExtractorRecord {
  std::vector<Concept> concepts;
  std::vector<CausalEdge> edges;
  std::string scene_summary;
};

struct ManipulatorRecord {
  std::vector<Intervention> interventions;
};

using EvaluatorRecord = EvalVerdict;

enum class SchemaKind { Extractor, Manipulator, Evaluator };

using SchemaRecord = std::variant<ExtractorRecord, ManipulatorRecord, EvaluatorRecord>;

// Required keys must be present with the right kind; unknown keys are
// ignored and strings are trimmed. Errors carry the JSON path as detail,
// e.g. MissingField("interventions[0].generation_prompt").
ExtractorRecord validate_extractor(const nlohmann::json& j);
ManipulatorRecord validate_manipulator(const nlohmann::json& j);
EvaluatorRecord validate_evaluator(const nlohmann::json& j);
SchemaRecord validate_schema(const nlohmann::json& j, SchemaKind kind);

}  // namespace fmcgm

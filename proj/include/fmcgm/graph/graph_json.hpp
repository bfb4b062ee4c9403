// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "fmcgm/graph/concept_graph.hpp"
#include "json.hpp"

namespace fmcgm {

/// {"concepts": [...], "relationships": [...], "scene_summary": "..."}
nlohmann::json to_json(const ConceptGraph& g);
/// Parses and validates; errors are those of validate_graph and validate_schema.
ConceptGraph graph_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CounterfactualState& s);
/// Checks the state against `g`: target present in assignments, all ids known.
CounterfactualState counterfactual_from_json(const nlohmann::json& j, const ConceptGraph& g);

}  // namespace fmcgm

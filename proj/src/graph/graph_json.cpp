// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "fmcgm/graph/graph_json.hpp"

#include "fmcgm/error.hpp"
#include "fmcgm/gateway/schemas.hpp"

namespace fmcgm {

using nlohmann::json;

json to_json(const ConceptGraph& g) {
  json concepts = json::array();
  for (const auto& c : g.concepts()) {
    concepts.push_back({{"id", c.id},
                        {"name", c.name},
                        {"current_value", c.current_value},
                        {"description", c.description}});
  }
  json relationships = json::array();
  for (const auto& e : g.edges()) {
    relationships.push_back({{"id", e.id},
                             {"cause_id", e.cause_id},
                             {"effect_id", e.effect_id},
                             {"description", e.description}});
  }
  return {{"concepts", std::move(concepts)},
          {"relationships", std::move(relationships)},
          {"scene_summary", g.scene_summary()}};
}

ConceptGraph graph_from_json(const json& j) {
  auto rec = validate_extractor(j);
  return validate_graph(std::move(rec.concepts), std::move(rec.edges), std::move(rec.scene_summary));
}

json to_json(const CounterfactualState& s) {
  return {{"target_id", s.target_id}, {"graph_ref", s.graph_ref}, {"assignments", s.assignments}};
}

CounterfactualState counterfactual_from_json(const json& j, const ConceptGraph& g) {
  CounterfactualState s;
  try {
    s.target_id = j.at("target_id").get<std::string>();
    s.graph_ref = j.value("graph_ref", std::string{});
    s.assignments = j.at("assignments").get<ValueMap>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::WrongKind, std::string("malformed counterfactual state: ") + e.what());
  }
  if (!s.assignments.contains(s.target_id)) {
    throw Error(ErrorCode::MissingTargetState, "assignments omit target '" + s.target_id + "'",
                s.target_id);
  }
  for (const auto& [id, value] : s.assignments) {
    if (!g.contains(id)) throw Error(ErrorCode::UnknownConcept, "unknown concept '" + id + "'", id);
  }
  return s;
}

}  // namespace fmcgm

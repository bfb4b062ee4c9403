// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fmcgm/error.hpp"
#include "fmcgm/gateway/client.hpp"
#include "fmcgm/graph/concept_graph.hpp"
#include "fmcgm/manipulator/intervention.hpp"

namespace fmcgm {

inline constexpr std::size_t kMaxValueWords = 3;

struct ManipulatorOptions {
  std::string model;
  std::optional<std::filesystem::path> template_dir;
  int max_attempts = 3;
  std::size_t count = 3;
  double temperature = 0.2;
  int max_tokens = 3072;
};

struct ValidatedIntervention {
  Intervention intervention;
  std::vector<std::string> warnings;
};

/// Cleans one model-proposed intervention against the graph:
///  * propagated changes must name a descendant of the target; others are dropped
///  * no-op changes (new == original, case-insensitive) and repeated ids are dropped
///  * values longer than three words are cut to their first three
///  * final_concept_states becomes {target: new_value} plus the surviving changes;
///    keys given by concept name are mapped to ids
/// Running it on its own output returns the same intervention with no warnings.
/// Errors: UnknownConcept (target), MissingTargetState (target absent from
/// final_concept_states).
ValidatedIntervention validate_intervention(const ConceptGraph& graph, Intervention iv);

struct ProposalOutcome {
  std::vector<Intervention> interventions;
  std::vector<std::string> warnings;
  int attempts = 0;
};

/// Asks the model for `opts.count` interventions with distinct targets and
/// validates each.
/// Errors: gateway errors; DuplicateTargets (not retried); ManipulationFailed
/// once max_attempts replies were unusable.
ProposalOutcome propose_interventions(VlmClient& client, const EncodedImage& image,
                                      const std::string& base_prompt, const ConceptGraph& graph,
                                      const std::string& image_id, const ManipulatorOptions& opts);

/// Prompts for guided editing. Descendant prompts follow the propagated list;
/// with no propagated changes the target's own value is used.
EditPromptSet build_edit_prompts(const Intervention& iv, const std::string& base_prompt);

/// JSON arrays for the manipulator template's concept and relationship slots.
std::string concepts_slot(const ConceptGraph& graph);
std::string relationships_slot(const ConceptGraph& graph);

/// Same layout the manipulator prompt asks for.
nlohmann::json to_json(const Intervention& iv);
nlohmann::json to_json(const EditPromptSet& p);
/// Inverse of to_json(EditPromptSet). Errors: SchemaInvalid.
EditPromptSet prompt_set_from_json(const nlohmann::json& j);

}  // namespace fmcgm

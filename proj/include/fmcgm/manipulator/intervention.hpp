// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fmcgm/graph/concept_graph.hpp"

namespace fmcgm {

struct PropagatedChange {
  std::string concept_id;
  std::string concept_name;
  std::string original_value;
  std::string new_value;
  std::string reason;

  bool operator==(const PropagatedChange&) const = default;
};

/// One do-operation proposed by the manipulator, with its downstream effects.
struct Intervention {
  std::string id;
  std::string target_concept_id;
  std::string target_concept_name;
  std::string intervention_description;
  std::string original_value;
  std::string new_value;
  std::vector<PropagatedChange> propagated_changes;
  ValueMap final_concept_states;
  /// Kept for logging and baselines; guidance uses EditPromptSet instead.
  std::string generation_prompt;

  bool operator==(const Intervention&) const = default;
};

/// Base, intervention and descendant prompts for one intervention.
struct EditPromptSet {
  std::string base_prompt;
  std::string intervention_prompt;
  std::vector<std::pair<std::string, std::string>> descendant_prompts;

  bool operator==(const EditPromptSet&) const = default;
};

}  // namespace fmcgm

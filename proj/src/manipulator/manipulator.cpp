// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "fmcgm/error.hpp"
#include "fmcgm/manipulator/manipulator.hpp"

#include <set>

#include "fmcgm/gateway/json_extract.hpp"
#include "fmcgm/gateway/schemas.hpp"
#include "fmcgm/prompts/templates.hpp"
#include "fmcgm/util/text.hpp"

namespace fmcgm {

using nlohmann::json;

namespace {

std::string clip_words(const std::string& value, const std::string& where,
                       std::vector<std::string>& warnings) {
  if (util::word_count(value) <= kMaxValueWords) return value;
  std::string cut = util::truncate_words(value, kMaxValueWords);
  warnings.push_back(where + ": '" + value + "' cut to '" + cut + "'");
  return cut;
}

/// Id for a final_concept_states key that may be an id or a concept name.
std::optional<std::string> resolve_key(const ConceptGraph& g, const std::string& key) {
  if (g.contains(key)) return key;
  for (const auto& c : g.concepts()) {
    if (util::same_text(c.name, key)) return c.id;
  }
  return std::nullopt;
}

}  // namespace

ValidatedIntervention validate_intervention(const ConceptGraph& graph, Intervention iv) {
  ValidatedIntervention out;
  auto& warnings = out.warnings;
  const std::string& target = iv.target_concept_id;
  if (!graph.contains(target)) {
    throw Error(ErrorCode::UnknownConcept, iv.id + " targets unknown concept '" + target + "'", target);
  }

  ValueMap states;
  for (const auto& [key, value] : iv.final_concept_states) {
    const auto id = resolve_key(graph, key);
    if (!id) {
      warnings.push_back(iv.id + ": final state for unknown concept '" + key + "' dropped");
      continue;
    }
    if (*id != key) warnings.push_back(iv.id + ": final state key '" + key + "' mapped to " + *id);
    states.emplace(*id, value);
  }
  if (!states.contains(target)) {
    throw Error(ErrorCode::MissingTargetState,
                iv.id + ": final_concept_states omits target '" + target + "'", target);
  }

  iv.new_value = clip_words(iv.new_value, iv.id + " new_value", warnings);

  const IdSet desc = descendants(graph, target);
  std::vector<PropagatedChange> kept;
  std::set<std::string> seen;
  for (auto& ch : iv.propagated_changes) {
    const std::string where = iv.id + " change " + ch.concept_id;
    if (!graph.contains(ch.concept_id)) {
      warnings.push_back(where + ": unknown concept, dropped");
      continue;
    }
    if (!desc.contains(ch.concept_id)) {
      warnings.push_back(where + ": not a descendant of " + target + ", dropped");
      continue;
    }
    if (!seen.insert(ch.concept_id).second) {
      warnings.push_back(where + ": repeated, dropped");
      continue;
    }
    ch.new_value = clip_words(ch.new_value, where, warnings);
    if (util::same_text(ch.new_value, ch.original_value)) {
      warnings.push_back(where + ": value unchanged, dropped");
      continue;
    }
    kept.push_back(std::move(ch));
  }
  iv.propagated_changes = std::move(kept);

  ValueMap reconciled;
  reconciled[target] = iv.new_value;
  for (const auto& ch : iv.propagated_changes) reconciled[ch.concept_id] = ch.new_value;
  for (const auto& [id, value] : states) {
    auto it = reconciled.find(id);
    if (it == reconciled.end()) {
      warnings.push_back(iv.id + ": final state for " + id + " has no surviving change, dropped");
    } else if (it->second != value) {
      warnings.push_back(iv.id + ": final state for " + id + " set to '" + it->second + "'");
    }
  }
  for (const auto& [id, value] : reconciled) {
    if (!states.contains(id)) warnings.push_back(iv.id + ": final state for " + id + " re-added");
  }
  iv.final_concept_states = std::move(reconciled);
  out.intervention = std::move(iv);
  return out;
}

EditPromptSet build_edit_prompts(const Intervention& iv, const std::string& base_prompt) {
  EditPromptSet out{base_prompt, iv.new_value, {}};
  for (const auto& ch : iv.propagated_changes) out.descendant_prompts.emplace_back(ch.concept_id, ch.new_value);
  if (out.descendant_prompts.empty()) out.descendant_prompts.emplace_back(iv.target_concept_id, iv.new_value);
  return out;
}

std::string concepts_slot(const ConceptGraph& graph) {
  json arr = json::array();
  for (const auto& c : graph.concepts()) {
    arr.push_back({{"id", c.id}, {"name", c.name}, {"current_value", c.current_value},
                   {"description", c.description}});
  }
  return arr.dump(2);
}

std::string relationships_slot(const ConceptGraph& graph) {
  json arr = json::array();
  for (const auto& e : graph.edges()) {
    arr.push_back({{"id", e.id}, {"cause_id", e.cause_id}, {"effect_id", e.effect_id},
                   {"description", e.description}});
  }
  return arr.dump(2);
}

ProposalOutcome propose_interventions(VlmClient& client, const EncodedImage& image,
                                      const std::string& base_prompt, const ConceptGraph& graph,
                                      const std::string& image_id, const ManipulatorOptions& opts) {
  const auto prompt = render_prompt(load_template(PromptKind::Manipulator, opts.template_dir),
                                    {{"scene_summary", graph.scene_summary()},
                                     {"concepts_json", concepts_slot(graph)},
                                     {"relationships_json", relationships_slot(graph)},
                                     {"base_prompt", base_prompt}});
  std::string last_error;
  for (int attempt = 0; attempt < opts.max_attempts; ++attempt) {
    ModelRequest req;
    req.model_name = opts.model;
    req.system_text = prompt.system_text;
    req.user_text = prompt.user_text;
    req.image = image;
    req.temperature = opts.temperature;
    req.max_tokens = opts.max_tokens;
    req.tag = image_id + "/manipulate";
    req.attempt = attempt;
    const auto reply = client.complete(req);

    ManipulatorRecord rec;
    try {
      rec = validate_manipulator(extract_json(reply.raw_text));
    } catch (const Error& e) {
      last_error = e.what();
      continue;
    }
    if (rec.interventions.size() != opts.count) {
      last_error = "expected " + std::to_string(opts.count) + " interventions, got " +
                   std::to_string(rec.interventions.size());
      continue;
    }
    std::set<std::string> targets;
    for (const auto& iv : rec.interventions) {
      if (!targets.insert(iv.target_concept_id).second) {
        throw Error(ErrorCode::DuplicateTargets,
                    "two interventions target '" + iv.target_concept_id + "'", iv.target_concept_id);
      }
    }
    ProposalOutcome out;
    out.attempts = attempt + 1;
    try {
      for (auto& iv : rec.interventions) {
        auto v = validate_intervention(graph, std::move(iv));
        out.warnings.insert(out.warnings.end(), v.warnings.begin(), v.warnings.end());
        out.interventions.push_back(std::move(v.intervention));
      }
    } catch (const Error& e) {
      last_error = e.what();
      continue;
    }
    return out;
  }
  throw Error(ErrorCode::ManipulationFailed,
              "no usable proposal after " + std::to_string(opts.max_attempts) + " attempts", last_error);
}

json to_json(const Intervention& iv) {
  json changes = json::array();
  for (const auto& ch : iv.propagated_changes) {
    changes.push_back({{"concept_id", ch.concept_id},
                       {"concept_name", ch.concept_name},
                       {"original_value", ch.original_value},
                       {"new_value", ch.new_value},
                       {"reason", ch.reason}});
  }
  return {{"id", iv.id},
          {"target_concept_id", iv.target_concept_id},
          {"target_concept_name", iv.target_concept_name},
          {"intervention_description", iv.intervention_description},
          {"original_value", iv.original_value},
          {"new_value", iv.new_value},
          {"propagated_changes", changes},
          {"final_concept_states", iv.final_concept_states},
          {"generation_prompt", iv.generation_prompt}};
}

json to_json(const EditPromptSet& p) {
  json desc = json::array();
  for (const auto& [id, text] : p.descendant_prompts) desc.push_back({{"concept_id", id}, {"prompt", text}});
  return {{"base_prompt", p.base_prompt},
          {"intervention_prompt", p.intervention_prompt},
          {"descendant_prompts", desc}};
}

EditPromptSet prompt_set_from_json(const json& j) {
  try {
    EditPromptSet p{j.at("base_prompt").get<std::string>(), j.at("intervention_prompt").get<std::string>(), {}};
    for (const auto& d : j.at("descendant_prompts")) {
      p.descendant_prompts.emplace_back(d.at("concept_id").get<std::string>(), d.at("prompt").get<std::string>());
    }
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaInvalid, "malformed prompt set", e.what());
  }
}

}  // namespace fmcgm

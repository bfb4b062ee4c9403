// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "fmcgm/gateway/schemas.hpp"

#include "fmcgm/error.hpp"
#include "fmcgm/util/text.hpp"

namespace fmcgm {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string at_index(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

const json& field(const json& obj, const std::string& path, const std::string& key) {
  if (!obj.is_object()) throw Error(ErrorCode::WrongKind, path + " must be an object", path);
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    throw Error(ErrorCode::MissingField, "missing " + join(path, key), join(path, key));
  }
  return *it;
}

std::string string_field(const json& obj, const std::string& path, const std::string& key,
                         bool required_non_empty) {
  const json& v = field(obj, path, key);
  if (!v.is_string()) {
    throw Error(ErrorCode::WrongKind, join(path, key) + " must be a string", join(path, key));
  }
  std::string s = util::trim(v.get_ref<const std::string&>());
  if (required_non_empty && s.empty()) {
    throw Error(ErrorCode::EmptyValue, join(path, key) + " is empty", join(path, key));
  }
  return s;
}

std::string optional_string(const json& obj, const std::string& path, const std::string& key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_string()) {
    throw Error(ErrorCode::WrongKind, join(path, key) + " must be a string", join(path, key));
  }
  return util::trim(it->get_ref<const std::string&>());
}

const json& array_field(const json& obj, const std::string& path, const std::string& key) {
  const json& v = field(obj, path, key);
  if (!v.is_array()) {
    throw Error(ErrorCode::WrongKind, join(path, key) + " must be an array", join(path, key));
  }
  return v;
}

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) {
    throw Error(ErrorCode::WrongKind, (path.empty() ? "document" : path) + " must be an object",
                path);
  }
}

}  // namespace

ExtractorRecord validate_extractor(const json& j) {
  require_object(j, "");
  ExtractorRecord rec;
  const json& concepts = array_field(j, "", "concepts");
  for (std::size_t i = 0; i < concepts.size(); ++i) {
    const std::string p = at_index("concepts", i);
    require_object(concepts[i], p);
    rec.concepts.push_back({string_field(concepts[i], p, "id", true),
                            string_field(concepts[i], p, "name", true),
                            string_field(concepts[i], p, "current_value", true),
                            optional_string(concepts[i], p, "description")});
  }
  const json& rels = array_field(j, "", "relationships");
  for (std::size_t i = 0; i < rels.size(); ++i) {
    const std::string p = at_index("relationships", i);
    require_object(rels[i], p);
    rec.edges.push_back({string_field(rels[i], p, "id", true),
                         string_field(rels[i], p, "cause_id", true),
                         string_field(rels[i], p, "effect_id", true),
                         optional_string(rels[i], p, "description")});
  }
  rec.scene_summary = string_field(j, "", "scene_summary", false);
  return rec;
}

ManipulatorRecord validate_manipulator(const json& j) {
  require_object(j, "");
  ManipulatorRecord rec;
  const json& ivs = array_field(j, "", "interventions");
  for (std::size_t i = 0; i < ivs.size(); ++i) {
    const std::string p = at_index("interventions", i);
    require_object(ivs[i], p);
    const json& o = ivs[i];
    Intervention iv;
    iv.id = string_field(o, p, "id", true);
    iv.target_concept_id = string_field(o, p, "target_concept_id", true);
    iv.target_concept_name = string_field(o, p, "target_concept_name", true);
    iv.intervention_description = optional_string(o, p, "intervention_description");
    iv.original_value = string_field(o, p, "original_value", false);
    iv.new_value = string_field(o, p, "new_value", true);

    const json& changes = array_field(o, p, "propagated_changes");
    for (std::size_t k = 0; k < changes.size(); ++k) {
      const std::string q = at_index(join(p, "propagated_changes"), k);
      require_object(changes[k], q);
      iv.propagated_changes.push_back({string_field(changes[k], q, "concept_id", true),
                                       string_field(changes[k], q, "concept_name", true),
                                       string_field(changes[k], q, "original_value", false),
                                       string_field(changes[k], q, "new_value", true),
                                       optional_string(changes[k], q, "reason")});
    }

    const std::string sp = join(p, "final_concept_states");
    const json& states = field(o, p, "final_concept_states");
    if (!states.is_object()) throw Error(ErrorCode::WrongKind, sp + " must be an object", sp);
    for (const auto& [key, value] : states.items()) {
      const std::string kp = join(sp, key);
      if (!value.is_string()) throw Error(ErrorCode::WrongKind, kp + " must be a string", kp);
      std::string v = util::trim(value.get_ref<const std::string&>());
      if (v.empty()) throw Error(ErrorCode::EmptyValue, kp + " is empty", kp);
      iv.final_concept_states[util::trim(key)] = std::move(v);
    }

    iv.generation_prompt = string_field(o, p, "generation_prompt", true);
    rec.interventions.push_back(std::move(iv));
  }
  return rec;
}

EvaluatorRecord validate_evaluator(const json& j) {
  require_object(j, "");
  EvaluatorRecord rec;
  rec.intervention_id = string_field(j, "", "intervention_id", false);
  const json& checks = array_field(j, "", "concept_checks");
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const std::string p = at_index("concept_checks", i);
    require_object(checks[i], p);
    ConceptCheck c;
    c.concept_name = string_field(checks[i], p, "concept_name", true);
    c.expected_value = string_field(checks[i], p, "expected_value", false);
    const std::string present = util::to_lower(string_field(checks[i], p, "present", true));
    if (present != "yes" && present != "no") {
      throw Error(ErrorCode::WrongKind, join(p, "present") + " must be one of \"yes|no\"",
                  join(p, "present"));
    }
    c.present = present == "yes";
    rec.concept_checks.push_back(std::move(c));
  }
  const std::string verdict = util::to_lower(string_field(j, "", "verdict", true));
  if (verdict == "success") rec.verdict = Verdict::Success;
  else if (verdict == "partial") rec.verdict = Verdict::Partial;
  else if (verdict == "failure") rec.verdict = Verdict::Failure;
  else {
    throw Error(ErrorCode::WrongKind, "verdict must be one of \"success|partial|failure\"",
                "verdict");
  }
  rec.reasoning = optional_string(j, "", "reasoning");
  return rec;
}

SchemaRecord validate_schema(const json& j, SchemaKind kind) {
  switch (kind) {
    case SchemaKind::Extractor: return validate_extractor(j);
    case SchemaKind::Manipulator: return validate_manipulator(j);
    case SchemaKind::Evaluator: return validate_evaluator(j);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown schema kind");
}

}  // namespace fmcgm

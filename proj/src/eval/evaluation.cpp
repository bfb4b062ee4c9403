// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "fmcgm/error.hpp"
#include "fmcgm/eval/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <tuple>

#include "fmcgm/gateway/json_extract.hpp"
#include "fmcgm/gateway/schemas.hpp"
#include "fmcgm/prompts/templates.hpp"
#include "fmcgm/util/text.hpp"

namespace fmcgm {

using nlohmann::json;

std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::Success: return "success";
    case Verdict::Partial: return "partial";
    case Verdict::Failure: return "failure";
  }
  return "failure";
}

std::string Checklist::render() const {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += '\n';
    out += item.concept_name + ": " + item.expected_value;
  }
  return out;
}

Checklist build_checklist(const Intervention& iv) {
  if (iv.final_concept_states.empty()) {
    throw Error(ErrorCode::EmptyStates, iv.id + " has no final concept states", iv.id);
  }
  Checklist out;
  std::set<std::string> used;
  auto add = [&](const std::string& id, const std::string& name) {
    auto it = iv.final_concept_states.find(id);
    if (it == iv.final_concept_states.end() || !used.insert(id).second) return;
    out.items.push_back({id, name.empty() ? id : name, it->second});
  };
  add(iv.target_concept_id, iv.target_concept_name);
  for (const auto& ch : iv.propagated_changes) add(ch.concept_id, ch.concept_name);
  for (const auto& [id, value] : iv.final_concept_states) add(id, id);
  return out;
}

void check_rubric(const EvalVerdict& v) {
  const bool all_yes = !v.concept_checks.empty() &&
                       std::all_of(v.concept_checks.begin(), v.concept_checks.end(),
                                   [](const ConceptCheck& c) { return c.present; });
  if (v.verdict == Verdict::Success && !all_yes) {
    throw Error(ErrorCode::SchemaInvalid, "verdict 'success' with a check answered no");
  }
  if (all_yes && v.verdict != Verdict::Success) {
    throw Error(ErrorCode::SchemaInvalid,
                "every check is yes but verdict is '" + std::string(to_string(v.verdict)) + "'");
  }
}

double checklist_score(const Checklist& checklist, const EvalVerdict& v) {
  if (checklist.items.empty()) throw Error(ErrorCode::EmptyStates, "empty checklist");
  std::vector<std::optional<bool>> answer(checklist.items.size());
  bool any_named = false;
  for (const auto& check : v.concept_checks) {
    for (std::size_t i = 0; i < checklist.items.size(); ++i) {
      if (!answer[i] && util::same_text(check.concept_name, checklist.items[i].concept_name)) {
        answer[i] = check.present;
        any_named = true;
        break;
      }
    }
  }
  if (!any_named && v.concept_checks.size() == checklist.items.size()) {
    for (std::size_t i = 0; i < answer.size(); ++i) answer[i] = v.concept_checks[i].present;
  }
  const auto yes = std::count_if(answer.begin(), answer.end(), [](const auto& a) { return a.value_or(false); });
  return static_cast<double>(yes) / static_cast<double>(checklist.items.size());
}

VlmEffResult vlm_eff(VlmClient& client, const EncodedImage& counterfactual, const Intervention& iv,
                     const std::string& generation_prompt, const std::string& tag,
                     const EvaluatorOptions& opts) {
  const Checklist checklist = build_checklist(iv);
  const auto prompt = render_prompt(load_template(PromptKind::Evaluator, opts.template_dir),
                                    {{"generation_prompt", generation_prompt},
                                     {"target_concept_name", iv.target_concept_name},
                                     {"original_value", iv.original_value},
                                     {"new_value", iv.new_value},
                                     {"checklist_text", checklist.render()}});
  std::string last_error;
  for (int attempt = 0; attempt < opts.max_attempts; ++attempt) {
    ModelRequest req;
    req.model_name = opts.model;
    req.system_text = prompt.system_text;
    req.user_text = prompt.user_text;
    req.image = counterfactual;
    req.temperature = opts.temperature;
    req.max_tokens = opts.max_tokens;
    req.tag = tag;
    req.attempt = attempt;
    const auto reply = client.complete(req);
    try {
      EvalVerdict v = validate_evaluator(extract_json(reply.raw_text));
      check_rubric(v);
      if (v.intervention_id.empty()) v.intervention_id = iv.id;
      return {v, checklist_score(checklist, v), attempt + 1};
    } catch (const Error& e) {
      last_error = e.what();
    }
  }
  throw Error(ErrorCode::SchemaInvalid,
              "no usable evaluation after " + std::to_string(opts.max_attempts) + " attempts", last_error);
}

std::string_view to_string(DistanceMethod m) noexcept {
  return m == DistanceMethod::LpipsRemote ? "lpips_remote" : "pixel_mse_fallback";
}

DistanceMethod parse_distance_method(std::string_view name) {
  if (name == "lpips_remote") return DistanceMethod::LpipsRemote;
  if (name == "pixel_mse_fallback") return DistanceMethod::PixelMseFallback;
  throw Error(ErrorCode::ConfigError, "unknown distance method '" + std::string(name) + "'");
}

double pixel_mse(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
    throw Error(ErrorCode::ShapeMismatch, "images differ in size or channel count");
  }
  if (a.pixels.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = (static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i])) / 255.0;
    sum += d * d;
  }
  return sum / static_cast<double>(a.pixels.size());
}

double perceptual_distance(const Image& factual, const Image& counterfactual, DistanceMethod method,
                           const ServiceClient* service) {
  if (factual.width != counterfactual.width || factual.height != counterfactual.height) {
    throw Error(ErrorCode::ShapeMismatch, "images differ in size");
  }
  if (method == DistanceMethod::PixelMseFallback) return pixel_mse(factual, counterfactual);
  if (!service) throw Error(ErrorCode::InvalidArgument, "lpips_remote needs a diffusion service");
  return service->lpips(factual, counterfactual);
}

namespace {

double ordered_mean(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

std::optional<double> optional_mean(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return ordered_mean(v);
}

}  // namespace

EvalResult aggregate(std::span<const ExampleRecord> records, DistanceMethod distance_method) {
  if (records.empty()) throw Error(ErrorCode::EmptyInput, "nothing to aggregate");
  struct Acc {
    std::vector<double> eff;
    std::vector<double> dist;
  };
  std::map<std::pair<std::string, std::string>, Acc> groups;
  for (const auto& r : records) {
    auto& g = groups[{r.method, r.dataset}];
    g.eff.push_back(r.vlm_eff);
    if (r.distance) g.dist.push_back(*r.distance);
  }

  EvalResult out;
  out.distance_method = distance_method;
  out.per_example.assign(records.begin(), records.end());
  std::sort(out.per_example.begin(), out.per_example.end(), [](const auto& a, const auto& b) {
    return std::tie(a.method, a.dataset, a.image_id, a.intervention_id) <
           std::tie(b.method, b.dataset, b.image_id, b.intervention_id);
  });

  std::map<std::string, Acc> by_method;
  for (const auto& [key, acc] : groups) {
    GroupMean m{key.first, key.second, ordered_mean(acc.eff), optional_mean(acc.dist), acc.eff.size()};
    by_method[key.first].eff.push_back(m.vlm_eff);
    if (m.distance) by_method[key.first].dist.push_back(*m.distance);
    out.per_dataset.push_back(std::move(m));
  }
  for (const auto& [method, acc] : by_method) {
    std::size_t n = 0;
    for (const auto& g : out.per_dataset) n += g.method == method ? g.count : 0;
    out.overall.push_back({method, "Average", ordered_mean(acc.eff), optional_mean(acc.dist), n});
  }
  return out;
}

json to_json(const ExampleRecord& r) {
  json j = {{"method", r.method},         {"dataset", r.dataset}, {"image_id", r.image_id},
            {"intervention_id", r.intervention_id}, {"vlm_eff", r.vlm_eff}};
  j["distance"] = r.distance ? json(*r.distance) : json(nullptr);
  return j;
}

ExampleRecord example_from_json(const json& j) {
  try {
    ExampleRecord r;
    r.method = j.value("method", std::string("CSG"));
    r.dataset = j.at("dataset").get<std::string>();
    r.image_id = j.value("image_id", std::string());
    r.intervention_id = j.value("intervention_id", std::string());
    r.vlm_eff = j.at("vlm_eff").get<double>();
    if (j.contains("distance") && !j.at("distance").is_null()) r.distance = j.at("distance").get<double>();
    if (r.vlm_eff < 0.0 || r.vlm_eff > 1.0 || (r.distance && *r.distance < 0.0)) {
      throw Error(ErrorCode::SchemaInvalid, "example scores out of range");
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaInvalid, "malformed example record", e.what());
  }
}

namespace {
json group_json(const GroupMean& g) {
  json j = {{"method", g.method}, {"dataset", g.dataset}, {"vlm_eff", g.vlm_eff}, {"count", g.count}};
  j["distance"] = g.distance ? json(*g.distance) : json(nullptr);
  return j;
}
}  // namespace

json to_json(const EvalResult& r) {
  json j;
  j["distance_method"] = std::string(to_string(r.distance_method));
  j["distance_comparable_to_lpips"] = r.distance_method == DistanceMethod::LpipsRemote;
  j["per_example"] = json::array();
  for (const auto& e : r.per_example) j["per_example"].push_back(to_json(e));
  j["per_dataset"] = json::array();
  for (const auto& g : r.per_dataset) j["per_dataset"].push_back(group_json(g));
  j["overall"] = json::array();
  for (const auto& g : r.overall) j["overall"].push_back(group_json(g));
  return j;
}

std::string to_csv(const EvalResult& r) {
  std::string out = "method,dataset,vlm_eff,";
  out += r.distance_method == DistanceMethod::LpipsRemote ? "lpips\n" : "pixel_mse\n";
  auto row = [&out](const GroupMean& g) {
    char buf[64];
    out += g.method + "," + g.dataset + ",";
    std::snprintf(buf, sizeof buf, "%.3f,", g.vlm_eff);
    out += buf;
    if (g.distance) {
      std::snprintf(buf, sizeof buf, "%.4f", *g.distance);
      out += buf;
    }
    out += "\n";
  };
  for (const auto& g : r.per_dataset) row(g);
  for (const auto& g : r.overall) row(g);
  return out;
}

json to_json(const EvalVerdict& v) {
  json checks = json::array();
  for (const auto& c : v.concept_checks) {
    checks.push_back({{"concept_name", c.concept_name},
                      {"expected_value", c.expected_value},
                      {"present", c.present ? "yes" : "no"}});
  }
  return {{"intervention_id", v.intervention_id},
          {"concept_checks", checks},
          {"verdict", std::string(to_string(v.verdict))},
          {"reasoning", v.reasoning}};
}

}  // namespace fmcgm

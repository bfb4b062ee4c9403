// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "fmcgm/error.hpp"
#include "fmcgm/backend/service_client.hpp"
#include "fmcgm/eval/verdict.hpp"
#include "fmcgm/gateway/client.hpp"
#include "fmcgm/manipulator/intervention.hpp"

namespace fmcgm {

struct ChecklistItem {
  std::string concept_id;
  std::string concept_name;
  std::string expected_value;

  bool operator==(const ChecklistItem&) const = default;
};

struct Checklist {
  std::vector<ChecklistItem> items;

  /// One "name: expected value" line per item.
  [[nodiscard]] std::string render() const;
};

/// One item per final state: the target first, then propagated order, then
/// any remaining ids in key order. Errors: EmptyStates.
Checklist build_checklist(const Intervention& iv);

/// Throws SchemaInvalid when the verdict contradicts the checks: "success"
/// requires every check to be yes, and all-yes requires "success".
void check_rubric(const EvalVerdict& v);

/// Fraction of checklist items whose check says yes. Checks are matched to
/// items by concept name (case-insensitive), or by position when no names
/// match and the counts agree. Unmatched items count as no.
double checklist_score(const Checklist& checklist, const EvalVerdict& v);

struct EvaluatorOptions {
  std::string model;
  std::optional<std::filesystem::path> template_dir;
  int max_attempts = 3;
  double temperature = 0.0;
  int max_tokens = 1024;
};

struct VlmEffResult {
  EvalVerdict verdict;
  double score = 0.0;
  int attempts = 0;
};

/// Errors: gateway errors; EmptyStates; SchemaInvalid after max_attempts
/// unparseable or rubric-inconsistent replies.
VlmEffResult vlm_eff(VlmClient& client, const EncodedImage& counterfactual, const Intervention& iv,
                     const std::string& generation_prompt, const std::string& tag,
                     const EvaluatorOptions& opts);

enum class DistanceMethod { LpipsRemote, PixelMseFallback };

std::string_view to_string(DistanceMethod m) noexcept;
DistanceMethod parse_distance_method(std::string_view name);

/// Mean squared error over all channels with pixels scaled to [0, 1].
/// Errors: ShapeMismatch.
double pixel_mse(const Image& a, const Image& b);

/// Errors: ShapeMismatch; ServiceUnavailable (remote); InvalidArgument when
/// LpipsRemote is asked for without a service.
double perceptual_distance(const Image& factual, const Image& counterfactual, DistanceMethod method,
                           const ServiceClient* service = nullptr);

struct ExampleRecord {
  std::string method = "CSG";
  std::string dataset;
  std::string image_id;
  std::string intervention_id;
  double vlm_eff = 0.0;
  std::optional<double> distance;

  bool operator==(const ExampleRecord&) const = default;
};

struct GroupMean {
  std::string method;
  /// Dataset name, or "Average" for the cross-dataset row.
  std::string dataset;
  double vlm_eff = 0.0;
  std::optional<double> distance;
  std::size_t count = 0;
};

struct EvalResult {
  std::vector<ExampleRecord> per_example;
  /// Sorted by (method, dataset).
  std::vector<GroupMean> per_dataset;
  /// Per method: mean of its dataset means.
  std::vector<GroupMean> overall;
  DistanceMethod distance_method = DistanceMethod::LpipsRemote;
};

/// Per-(method, dataset) arithmetic means and, per method, the mean of the
/// dataset means. Summation order is fixed, so the result does not depend
/// on record order. Errors: EmptyInput.
EvalResult aggregate(std::span<const ExampleRecord> records,
                     DistanceMethod distance_method = DistanceMethod::LpipsRemote);

nlohmann::json to_json(const ExampleRecord& r);
ExampleRecord example_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EvalResult& r);
/// Columns: method,dataset,vlm_eff,lpips (the distance column is named
/// pixel_mse when the fallback was used). VLM-Eff printed to 3 decimals,
/// distance to 4.
std::string to_csv(const EvalResult& r);

nlohmann::json to_json(const EvalVerdict& v);

}  // namespace fmcgm

// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fmcgm/error.hpp"
#include "fmcgm/gateway/client.hpp"
#include "fmcgm/graph/concept_graph.hpp"

namespace fmcgm {

struct ExtractorOptions {
  std::string model;
  /// Directory holding describe.txt / extractor.txt overrides; built-ins otherwise.
  std::optional<std::filesystem::path> template_dir;
  int max_attempts = 3;
  int min_concepts = 5;
  int max_concepts = 20;
  double temperature = 0.1;
  int describe_max_tokens = 256;
  int extract_max_tokens = 2048;
};

/// Base prompt for the image: one paragraph, at most three sentences.
struct SceneDescription {
  std::string text;
};

/// Collapses whitespace to a single paragraph and keeps the first three
/// sentences. Strips wrapping quotes.
std::string normalize_description(std::string_view raw);

/// Errors: gateway errors; ExtractionFailed if the model returns nothing usable.
SceneDescription describe_scene(VlmClient& client, const EncodedImage& image,
                                const std::string& image_id, const ExtractorOptions& opts);

struct ExtractionOutcome {
  ConceptGraph graph;
  /// Concepts that look like lighting or posture, which the prompt forbids.
  std::vector<std::string> warnings;
  int attempts = 0;
};

/// Renders the extractor prompt with `base_prompt`, asks the model, and
/// validates the reply. Unparseable, schema-invalid, cyclic or out-of-bounds
/// graphs are retried up to max_attempts. If the attempts run out and a
/// reply was rejected only for cycles, its back-edges are pruned (depth-first,
/// edge-list order) and the repaired graph is returned with warnings.
/// Errors: gateway errors; ExtractionFailed whose message starts with the
/// reason of the last attempt (CycleDetected, TooFewConcepts, ...).
ExtractionOutcome extract(VlmClient& client, const EncodedImage& image,
                          const std::string& base_prompt, const std::string& image_id,
                          const ExtractorOptions& opts);

/// Warnings for concepts whose name or description mentions lighting or posture.
std::vector<std::string> forbidden_concept_warnings(const ConceptGraph& g);

}  // namespace fmcgm

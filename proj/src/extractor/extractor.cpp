// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "fmcgm/error.hpp"
#include "fmcgm/extractor/extractor.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

#include "fmcgm/gateway/json_extract.hpp"
#include "fmcgm/gateway/schemas.hpp"
#include "fmcgm/graph/graph_json.hpp"
#include "fmcgm/prompts/templates.hpp"
#include "fmcgm/util/text.hpp"

namespace fmcgm {

std::string normalize_description(std::string_view raw) {
  std::string flat;
  for (const auto& w : util::split_words(raw)) {
    if (!flat.empty()) flat += ' ';
    flat += w;
  }
  while (flat.size() >= 2 && (flat.front() == '"' || flat.front() == '\'') && flat.back() == flat.front()) {
    flat = util::trim(flat.substr(1, flat.size() - 2));
  }
  int sentences = 0;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const char c = flat[i];
    const bool end = (c == '.' || c == '!' || c == '?') && (i + 1 == flat.size() || flat[i + 1] == ' ');
    if (end && ++sentences == 3) return flat.substr(0, i + 1);
  }
  return flat;
}

SceneDescription describe_scene(VlmClient& client, const EncodedImage& image,
                                const std::string& image_id, const ExtractorOptions& opts) {
  const auto prompt = render_prompt(load_template(PromptKind::Describe, opts.template_dir), {});
  ModelRequest req;
  req.model_name = opts.model;
  req.system_text = prompt.system_text;
  req.user_text = prompt.user_text;
  req.image = image;
  req.temperature = opts.temperature;
  req.max_tokens = opts.describe_max_tokens;
  req.tag = image_id + "/describe";
  const auto text = normalize_description(client.complete(req).raw_text);
  if (text.empty()) {
    throw Error(ErrorCode::ExtractionFailed, "EmptyDescription: model returned no caption", image_id);
  }
  return {text};
}

std::vector<std::string> forbidden_concept_warnings(const ConceptGraph& g) {
  static constexpr std::string_view kWords[] = {"lighting", "light", "illumination", "posture", "pose"};
  std::vector<std::string> out;
  for (const auto& c : g.concepts()) {
    const auto words = util::split_words(util::to_lower(c.name + " " + c.description));
    for (const auto& w : words) {
      std::string bare;
      for (char ch : w) {
        if (std::isalpha(static_cast<unsigned char>(ch))) bare += ch;
      }
      if (std::find(std::begin(kWords), std::end(kWords), bare) != std::end(kWords)) {
        out.push_back("concept " + c.id + " ('" + c.name + "') looks like " + bare);
        break;
      }
    }
  }
  return out;
}

ExtractionOutcome extract(VlmClient& client, const EncodedImage& image, const std::string& base_prompt,
                          const std::string& image_id, const ExtractorOptions& opts) {
  if (util::trim(base_prompt).empty()) {
    throw Error(ErrorCode::InvalidArgument, "extract needs a non-empty base prompt");
  }
  const auto prompt = render_prompt(load_template(PromptKind::Extractor, opts.template_dir),
                                    {{"prompt", base_prompt}});
  std::string last_reason;
  std::string last_detail;
  std::optional<ExtractorRecord> cyclic;
  auto accept = [&](ConceptGraph graph, int attempts) -> std::optional<ExtractionOutcome> {
    const auto n = static_cast<int>(graph.size());
    if (n < opts.min_concepts || n > opts.max_concepts) {
      last_reason = n < opts.min_concepts ? "TooFewConcepts" : "TooManyConcepts";
      last_detail = "graph has " + std::to_string(n) + " concepts, need " + std::to_string(opts.min_concepts) +
                    "-" + std::to_string(opts.max_concepts);
      return std::nullopt;
    }
    ExtractionOutcome out{std::move(graph), {}, attempts};
    out.warnings = forbidden_concept_warnings(out.graph);
    return out;
  };

  int attempt = 0;
  for (; attempt < opts.max_attempts; ++attempt) {
    ModelRequest req;
    req.model_name = opts.model;
    req.system_text = prompt.system_text;
    req.user_text = prompt.user_text;
    req.image = image;
    req.temperature = opts.temperature;
    req.max_tokens = opts.extract_max_tokens;
    req.tag = image_id + "/extract";
    req.attempt = attempt;
    const auto reply = client.complete(req);
    try {
      ExtractorRecord rec = validate_extractor(extract_json(reply.raw_text));
      try {
        if (auto out = accept(validate_graph(rec.concepts, rec.edges, rec.scene_summary), attempt + 1)) {
          for (const auto& w : out->warnings) std::fprintf(stderr, "[extract %s] warning: %s\n", image_id.c_str(), w.c_str());
          return std::move(*out);
        }
      } catch (const Error& e) {
        if (e.code() == ErrorCode::CycleDetected) cyclic = std::move(rec);
        throw;
      }
    } catch (const Error& e) {
      last_reason = std::string(to_string(e.code()));
      last_detail = e.what();
    }
  }

  // Retries exhausted. A reply that failed only for its cycles is repaired
  // by dropping DFS back-edges.
  if (cyclic) {
    std::vector<CausalEdge> removed;
    try {
      auto edges = prune_back_edges(cyclic->concepts, cyclic->edges, &removed);
      if (auto out = accept(validate_graph(cyclic->concepts, std::move(edges), cyclic->scene_summary), attempt)) {
        for (const auto& e : removed) {
          out->warnings.push_back("pruned edge " + e.id + " (" + e.cause_id + " -> " + e.effect_id + ") to break a cycle");
        }
        for (const auto& w : out->warnings) std::fprintf(stderr, "[extract %s] warning: %s\n", image_id.c_str(), w.c_str());
        return std::move(*out);
      }
    } catch (const Error& e) {
      last_reason = std::string(to_string(e.code()));
      last_detail = e.what();
    }
  }
  throw Error(ErrorCode::ExtractionFailed,
              last_reason + " after " + std::to_string(opts.max_attempts) + " attempts", last_detail);
}

}  // namespace fmcgm

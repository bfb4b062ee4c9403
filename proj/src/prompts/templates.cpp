// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "fmcgm/prompts/templates.hpp"

#include "fmcgm/util/codec.hpp"
#include "fmcgm/util/text.hpp"

namespace fmcgm {

namespace embedded {
extern const char* const kDescribe;
extern const char* const kExtractor;
extern const char* const kManipulator;
extern const char* const kEvaluator;
}  // namespace embedded

std::string_view prompt_file_stem(PromptKind kind) noexcept {
  switch (kind) {
    case PromptKind::Describe: return "describe";
    case PromptKind::Extractor: return "extractor";
    case PromptKind::Manipulator: return "manipulator";
    case PromptKind::Evaluator: return "evaluator";
  }
  return "";
}

namespace {
std::string_view without_final_newline(std::string_view s) {
  if (s.ends_with('\n')) s.remove_suffix(1);
  return s;
}
}  // namespace

std::string_view builtin_template(PromptKind kind) noexcept {
  switch (kind) {
    case PromptKind::Describe: return without_final_newline(embedded::kDescribe);
    case PromptKind::Extractor: return without_final_newline(embedded::kExtractor);
    case PromptKind::Manipulator: return without_final_newline(embedded::kManipulator);
    case PromptKind::Evaluator: return without_final_newline(embedded::kEvaluator);
  }
  return {};
}

std::string load_template(PromptKind kind, const std::optional<std::filesystem::path>& dir) {
  if (dir) {
    auto path = *dir / (std::string(prompt_file_stem(kind)) + ".txt");
    if (std::filesystem::is_regular_file(path)) {
      return std::string(without_final_newline(util::read_text_file(path)));
    }
  }
  return std::string(builtin_template(kind));
}

std::string RenderedPrompt::full() const {
  return system_text.empty() ? user_text : system_text + "\n\n" + user_text;
}

RenderedPrompt render_prompt(std::string_view tmpl, const std::map<std::string, std::string>& slots) {
  auto split = tmpl.find("\n\n");
  if (split == std::string_view::npos) return {{}, util::render_template(tmpl, slots)};
  return {util::render_template(tmpl.substr(0, split), slots),
          util::render_template(tmpl.substr(split + 2), slots)};
}

}  // namespace fmcgm

// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace fmcgm {

enum class PromptKind { Describe, Extractor, Manipulator, Evaluator };

/// File stem of a template under prompts/ ("extractor", ...).
std::string_view prompt_file_stem(PromptKind kind) noexcept;

/// Template text compiled into the library from prompts/<stem>.txt.
std::string_view builtin_template(PromptKind kind) noexcept;

/// `<dir>/<stem>.txt` when `dir` is set and the file exists, else the builtin.
std::string load_template(PromptKind kind, const std::optional<std::filesystem::path>& dir);

/// A template split at its first blank line: the opening paragraph becomes the
/// system message and the remainder the user message.
struct RenderedPrompt {
  std::string system_text;
  std::string user_text;

  /// The exact rendered template text.
  [[nodiscard]] std::string full() const;
};

RenderedPrompt render_prompt(std::string_view tmpl, const std::map<std::string, std::string>& slots);

}  // namespace fmcgm

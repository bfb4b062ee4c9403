// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "fmcgm/gateway/json_extract.hpp"

#include <optional>
#include <string>

#include "fmcgm/error.hpp"

namespace fmcgm {

namespace {

std::string strip_fences(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    std::size_t first = line.find_first_not_of(" \t\r");
    bool fence = first != std::string_view::npos && line.substr(first).starts_with("```");
    if (!fence) {
      out.append(line);
      if (eol < text.size()) out += '\n';
    } else if (eol < text.size()) {
      out += '\n';
    }
    pos = eol + 1;
  }
  return out;
}

// Index one past the brace matching text[open], or nullopt if unbalanced.
std::optional<std::size_t> match_brace(const std::string& text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i + 1;
  }
  return std::nullopt;
}

std::string clip(std::string_view s) {
  constexpr std::size_t kMax = 200;
  return s.size() <= kMax ? std::string(s) : std::string(s.substr(0, kMax)) + "...";
}

}  // namespace

nlohmann::json extract_json(std::string_view raw_text) {
  const std::string text = strip_fences(raw_text);
  std::size_t open = text.find('{');
  if (open == std::string::npos) throw Error(ErrorCode::NoJsonFound, "no '{' in model output");

  std::optional<Error> first_failure;
  while (open != std::string::npos) {
    auto close = match_brace(text, open);
    if (!close) {
      if (!first_failure) {
        first_failure.emplace(ErrorCode::MalformedJson, "unbalanced braces in model output",
                              clip(std::string_view(text).substr(open)));
      }
      break;
    }
    std::string_view span = std::string_view(text).substr(open, *close - open);
    auto parsed = nlohmann::json::parse(span, nullptr, /*allow_exceptions=*/false);
    if (!parsed.is_discarded() && parsed.is_object()) return parsed;
    if (!first_failure) {
      first_failure.emplace(ErrorCode::MalformedJson, "balanced block does not parse as JSON",
                            clip(span));
    }
    open = text.find('{', open + 1);
  }
  throw *first_failure;
}

}  // namespace fmcgm

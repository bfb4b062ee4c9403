// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace fmcgm::util {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split_words(std::string_view s);
std::size_t word_count(std::string_view s);

/// Keeps the first `max_words` whitespace-separated tokens, joined by single spaces.
std::string truncate_words(std::string_view s, std::size_t max_words);

/// Case-insensitive comparison after trimming.
bool same_text(std::string_view a, std::string_view b);

/// Single-pass substitution of `{name}` slots. Only names present in `slots`
/// are replaced; other braces (e.g. literal JSON in a template) pass through.
std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& slots);

}  // namespace fmcgm::util

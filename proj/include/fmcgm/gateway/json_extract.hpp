// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>

#include "json.hpp"

namespace fmcgm {

/// Pulls the JSON object out of free-form model output.
///
/// Code-fence lines (```, ```json, ...) are removed first, then the text is
/// scanned for the first `{` whose braces balance (string literals and
/// escapes respected) and which parses. Throws NoJsonFound when no `{`
/// exists and MalformedJson otherwise; the error detail holds the offending span.
nlohmann::json extract_json(std::string_view raw_text);

}  // namespace fmcgm

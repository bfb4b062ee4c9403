// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace fmcgm {

enum class Verdict { Success, Partial, Failure };

std::string_view to_string(Verdict v) noexcept;

struct ConceptCheck {
  std::string concept_name;
  std::string expected_value;
  bool present = false;

  bool operator==(const ConceptCheck&) const = default;
};

struct EvalVerdict {
  std::string intervention_id;
  std::vector<ConceptCheck> concept_checks;
  Verdict verdict = Verdict::Failure;
  std::string reasoning;

  bool operator==(const EvalVerdict&) const = default;
};

}  // namespace fmcgm

// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "fmcgm/csg/masks.hpp"

namespace fmcgm {

std::size_t quantile_count(std::size_t n, double threshold) {
  const double raw = (1.0 - threshold) * static_cast<double>(n);
  const auto k = static_cast<std::size_t>(std::floor(raw * (1.0 + 1e-9)));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(n, 1));
}

}  // namespace fmcgm

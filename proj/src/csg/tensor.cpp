// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "fmcgm/csg/tensor.hpp"

namespace fmcgm {

std::string to_string(const LatentShape& s) {
  return "(" + std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" +
         std::to_string(s.width) + ")";
}

std::string to_string(const GridShape& s) {
  return "(" + std::to_string(s.height) + "x" + std::to_string(s.width) + ")";
}

}  // namespace fmcgm

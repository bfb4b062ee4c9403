// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

namespace fmcgm::util {

struct SplitUrl {
  std::string scheme_host_port;
  /// Without a trailing slash; empty for a bare host.
  std::string path_prefix;
};

/// "https://host:8080/v1/" -> {"https://host:8080", "/v1"}. ConfigError without a scheme.
SplitUrl split_url(const std::string& url);

}  // namespace fmcgm::util

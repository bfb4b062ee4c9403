// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <string>

#include "json.hpp"

#include "fmcgm/util/image.hpp"

namespace fmcgm {

/// JSON-over-HTTP access to the diffusion service.
/// Connection failures and 503 raise ServiceUnavailable; any other non-200
/// status raises BackendError with the response body as detail.
class ServiceClient {
 public:
  explicit ServiceClient(std::string base_url,
                         std::chrono::milliseconds timeout = std::chrono::milliseconds(120000));

  [[nodiscard]] nlohmann::json get(const std::string& path) const;
  [[nodiscard]] nlohmann::json post(const std::string& path, const nlohmann::json& body) const;

  [[nodiscard]] bool healthy() const;
  /// POST /v1/lpips. Errors: InvalidArgument on unequal dimensions.
  [[nodiscard]] double lpips(const Image& a, const Image& b) const;

  [[nodiscard]] const std::string& base_url() const noexcept { return base_url_; }

 private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
};

}  // namespace fmcgm

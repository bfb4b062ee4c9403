// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "fmcgm/backend/denoiser.hpp"
#include "fmcgm/backend/service_client.hpp"

namespace fmcgm {

struct RemoteOptions {
  std::string base_url;
  std::string session = "default";
  std::chrono::milliseconds timeout{120000};
};

/// DenoiserBackend over the diffusion service. The constructor fetches
/// /v1/capabilities; every reply is checked against it.
/// Service failures surface as BackendError (ServiceUnavailable while the
/// service is loading or unreachable).
class RemoteBackend final : public DenoiserBackend {
 public:
  explicit RemoteBackend(RemoteOptions options);

  [[nodiscard]] const BackendCapabilities& capabilities() const override { return caps_; }
  [[nodiscard]] std::vector<PredictOutput> batch_predict(
      const Latent& latent, int timestep, std::span<const std::string> prompts) const override;
  [[nodiscard]] Latent encode(const Image& image) const override;
  [[nodiscard]] Image decode(const Latent& latent) const override;

  [[nodiscard]] const ServiceClient& service() const noexcept { return client_; }

 private:
  RemoteOptions options_;
  ServiceClient client_;
  BackendCapabilities caps_;
};

}  // namespace fmcgm

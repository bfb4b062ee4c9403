// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "fmcgm/backend/denoiser.hpp"

namespace fmcgm {

PredictOutput DenoiserBackend::predict(const Latent& latent, int timestep,
                                       const std::string& prompt) const {
  auto out = batch_predict(latent, timestep, std::span<const std::string>(&prompt, 1));
  if (out.size() != 1) throw Error(ErrorCode::BackendError, "backend returned no output");
  return std::move(out.front());
}

void DenoiserBackend::check_inputs(const Latent& latent, int timestep) const {
  const auto& caps = capabilities();
  if (!(latent.shape() == caps.latent_shape)) {
    throw Error(ErrorCode::ShapeMismatch, "latent " + to_string(latent.shape()) +
                                              " does not match backend " +
                                              to_string(caps.latent_shape));
  }
  if (timestep < 1 || timestep > caps.schedule.steps()) {
    throw Error(ErrorCode::BackendError, "timestep " + std::to_string(timestep) +
                                             " outside backend schedule");
  }
}

}  // namespace fmcgm

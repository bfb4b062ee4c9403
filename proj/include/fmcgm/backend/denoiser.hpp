// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fmcgm/csg/schedule.hpp"
#include "fmcgm/csg/tensor.hpp"
#include "fmcgm/util/image.hpp"

namespace fmcgm {

struct BackendCapabilities {
  std::string model;
  LatentShape latent_shape;
  GridShape attention_resolution;
  NoiseSchedule schedule;
};

struct PredictOutput {
  Latent eps;
  /// Absent for the empty (unconditional) prompt.
  std::optional<AttentionMap> attention;
};

/// eps_theta behind an interface. Implementations must be pure in
/// (latent, timestep, prompt); the empty prompt is the unconditional estimate.
class DenoiserBackend {
 public:
  virtual ~DenoiserBackend() = default;

  [[nodiscard]] virtual const BackendCapabilities& capabilities() const = 0;

  /// Elementwise equal to calling predict per prompt.
  /// Errors: BackendError, ShapeMismatch.
  [[nodiscard]] virtual std::vector<PredictOutput> batch_predict(
      const Latent& latent, int timestep, std::span<const std::string> prompts) const = 0;

  [[nodiscard]] virtual PredictOutput predict(const Latent& latent, int timestep,
                                              const std::string& prompt) const;

  [[nodiscard]] virtual Latent encode(const Image& image) const = 0;
  [[nodiscard]] virtual Image decode(const Latent& latent) const = 0;

 protected:
  /// Shape and timestep preconditions shared by implementations.
  void check_inputs(const Latent& latent, int timestep) const;
};

}  // namespace fmcgm

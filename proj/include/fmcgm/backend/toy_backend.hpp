// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>

#include "fmcgm/backend/denoiser.hpp"

namespace fmcgm {

struct Rect {
  int y = 0;
  int x = 0;
  int height = 0;
  int width = 0;

  [[nodiscard]] bool contains(int row, int col) const noexcept {
    return row >= y && row < y + height && col >= x && col < x + width;
  }
  bool operator==(const Rect&) const = default;
};

/// A prompt's effect on the toy data distribution: inside `region` the data
/// mean becomes `mean`; elsewhere the base mean is kept.
struct ToyConcept {
  Latent mean;
  Rect region;
};

/// Gaussian data world x0 ~ N(mu_Y, variance * I) with a prompt-dependent mean.
struct ToyWorld {
  LatentShape latent_shape{1, 16, 16};
  GridShape attention_resolution{16, 16};
  double variance = 0.25;
  /// mu_0; zeros when left empty.
  Latent base_mean;
  std::map<std::string, ToyConcept> vocabulary;
  /// Unknown non-empty prompts get a region and shift derived from a hash of
  /// the text instead of behaving like the empty prompt.
  bool auto_vocabulary = false;
  double auto_shift = 1.0;
  int schedule_steps = 1000;
  ScheduleKind schedule_kind = ScheduleKind::ScaledLinear;
  ScheduleParams schedule_params;
  /// Pixels per latent cell when decoding.
  int decode_scale = 8;

  /// Throws InvalidArgument on bad regions, non-positive variance or shape mismatches.
  void validate() const;

  /// Adds a concept whose mean is base + shift inside `region`.
  ToyWorld& add_shift_concept(const std::string& prompt, Rect region, double shift);
};

/// Closed-form denoiser for ToyWorld. For x_t = a x0 + s eps with
/// x0 ~ N(m, v I), the posterior-mean noise estimate is
///     eps = s (x_t - a m) / (a^2 v + s^2).
/// Attention grids are 1 on the prompt's region and 0 elsewhere.
class ToyBackend final : public DenoiserBackend {
 public:
  explicit ToyBackend(ToyWorld world);

  [[nodiscard]] const BackendCapabilities& capabilities() const override { return caps_; }
  [[nodiscard]] std::vector<PredictOutput> batch_predict(
      const Latent& latent, int timestep, std::span<const std::string> prompts) const override;
  [[nodiscard]] PredictOutput predict(const Latent& latent, int timestep,
                                      const std::string& prompt) const override;

  /// Area-resample to the latent grid, pixels mapped to [-1, 1].
  [[nodiscard]] Latent encode(const Image& image) const override;
  /// Inverse mapping, nearest-upsampled by decode_scale.
  [[nodiscard]] Image decode(const Latent& latent) const override;

  /// mu_Y for a prompt; the base mean for the empty or an unknown prompt.
  [[nodiscard]] Latent conditional_mean(const std::string& prompt) const;
  /// Region of a prompt, if it has one.
  [[nodiscard]] std::optional<Rect> region_of(const std::string& prompt) const;
  [[nodiscard]] const ToyWorld& world() const noexcept { return world_; }

 private:
  [[nodiscard]] std::optional<ToyConcept> lookup(const std::string& prompt) const;

  ToyWorld world_;
  BackendCapabilities caps_;
};

}  // namespace fmcgm

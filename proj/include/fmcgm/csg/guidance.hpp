// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fmcgm/backend/denoiser.hpp"
#include "fmcgm/csg/masks.hpp"
#include "fmcgm/csg/tensor.hpp"

namespace fmcgm {

/// Every knob of a CSG edit. Defaults are the reference configuration.
struct EditConfig {
  double edit_scale = 8.0;                       // for concepts without an override
  std::map<std::string, double> concept_scales;  // by concept id
  double threshold = 0.7;                        // mask quantile cut
  int warmup_steps = 10;
  int inversion_steps = 100;
  double skip_ratio = 0.15;
  double source_guidance = 3.5;
  bool intersect_masks = true;
  /// Apply classifier-free guidance (source_guidance) to the base term of the
  /// edit pass as well. Off: the base term is the intervention-prompt noise alone.
  bool guide_base = false;

  /// Throws InvalidArgument / InvalidSteps on out-of-range values.
  void validate() const;
  [[nodiscard]] double scale_for(const std::string& concept_id) const;
  /// ceil(skip_ratio * inversion_steps): denoising steps skipped before editing.
  [[nodiscard]] int start_index() const;
};

using DescendantPrompts = std::vector<std::pair<std::string, std::string>>;

/// Conditional minus unconditional noise prediction for one prompt.
template <typename Scalar>
LatentT<Scalar> concept_direction(const LatentT<Scalar>& eps_cond, const LatentT<Scalar>& eps_uncond) {
  return eps_cond - eps_uncond;
}

Latent concept_direction(const DenoiserBackend& backend, const Latent& x_t, int timestep,
                         const std::string& prompt);

/// scale * (attention mask AND noise mask) * direction, masks broadcast over
/// channels. With `intersect` off only the attention mask gates the term.
template <typename Scalar>
LatentT<Scalar> masked_direction(const LatentT<Scalar>& direction, const BinaryMask& m1,
                                 const BinaryMask& m2, Scalar scale, bool intersect) {
  const GridShape spatial = direction.shape().spatial();
  if (!(m1.shape() == spatial) || !(m2.shape() == spatial)) {
    throw Error(ErrorCode::ShapeMismatch, "mask shape does not match " + to_string(spatial));
  }
  const BinaryMask gate = intersect ? (m1 && m2) : m1;
  typename LatentT<Scalar>::Storage out =
      (scale * direction.values()).rowwise() * gate.template as_row<Scalar>();
  return LatentT<Scalar>(direction.shape(), std::move(out));
}

/// What one guided step computed, for inspection and coverage checks.
struct GuidanceStep {
  Latent base;
  Latent correction;
  /// Union over descendant prompts of the cells the correction may touch.
  BinaryMask active;
  bool fired = false;
};

/// Sum over descendant prompts of their masked directions. Zero while
/// step_index < warmup_steps or when there are no prompts.
Latent concept_guidance(const DenoiserBackend& backend, const Latent& x_t, int timestep,
                        const DescendantPrompts& descendant_prompts, const EditConfig& cfg,
                        int step_index, BinaryMask* active = nullptr);

/// Intervention-prompt noise plus the descendant guidance term.
Latent guided_epsilon(const DenoiserBackend& backend, const Latent& x_t, int timestep,
                      const std::string& intervention_prompt,
                      const DescendantPrompts& descendant_prompts, const EditConfig& cfg,
                      int step_index);

/// Both terms from one batched backend call: ["", intervention, descendants...].
GuidanceStep guidance_step(const DenoiserBackend& backend, const Latent& x_t, int timestep,
                           const std::optional<std::string>& intervention_prompt,
                           const DescendantPrompts& descendant_prompts, const EditConfig& cfg,
                           int step_index);

}  // namespace fmcgm

// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fmcgm/backend/denoiser.hpp"
#include "fmcgm/csg/guidance.hpp"
#include "fmcgm/csg/solver.hpp"
#include "fmcgm/manipulator/intervention.hpp"

namespace fmcgm {

/// Abduction output. `trajectory` is in denoising order: trajectory[0] is
/// z_T and trajectory[steps] is the input x0; trajectory[i] sits at solver
/// level steps - i. Editing resumes from trajectory[start_index].
struct InversionResult {
  std::vector<Latent> trajectory;
  int start_index = 0;
  SolverGrid grid;

  [[nodiscard]] int steps() const noexcept { return grid.steps(); }
  [[nodiscard]] const Latent& start() const { return trajectory.at(static_cast<std::size_t>(start_index)); }
};

/// Deterministic DPM-Solver++(2M) inversion of x0 under classifier-free
/// guidance eps_u + source_guidance (eps(Y) - eps_u).
/// Errors: BackendError, NonFiniteLatent, InvalidSteps.
InversionResult invert(const Latent& x0, const std::string& prompt, const EditConfig& cfg,
                       const DenoiserBackend& backend);

/// eps for the denoising pass: (x_t, timestep, step_index) with step_index
/// counting denoising steps from the start latent (0-based).
using EpsilonFn = std::function<Latent(const Latent&, int, int)>;

/// Runs the solver from trajectory[start_index] down to clean data.
Latent denoise(const InversionResult& inv, const EpsilonFn& eps_fn);

/// The guidance the inversion used; denoising with it reproduces x0.
EpsilonFn source_epsilon(const DenoiserBackend& backend, const std::string& prompt,
                         const EditConfig& cfg);

struct EditResult {
  Latent latent;
  /// Union over steps of the cells the guidance term could touch.
  BinaryMask mask_union;
  int guided_steps = 0;
};

/// Action + prediction: denoise from the inverted start with guided_epsilon.
EditResult edit_from(const InversionResult& inv, const EditPromptSet& prompts,
                     const EditConfig& cfg, const DenoiserBackend& backend);

/// Same pass with the guidance term switched off: the skip-truncated reconstruction the
/// edit is compared against.
Latent reconstruct(const InversionResult& inv, const EditPromptSet& prompts, const EditConfig& cfg,
                   const DenoiserBackend& backend);

/// invert + edit_from.
EditResult edit(const Latent& x0, const std::string& prompt, const EditPromptSet& prompts,
                const EditConfig& cfg, const DenoiserBackend& backend);

}  // namespace fmcgm

// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "fmcgm/csg/edit.hpp"

namespace fmcgm {

namespace {

void require_finite(const Latent& x, const char* stage, int level) {
  if (!x.all_finite()) {
    throw Error(ErrorCode::NonFiniteLatent, std::string(stage) + " produced a non-finite latent at level " +
                                                std::to_string(level));
  }
}

}  // namespace

EpsilonFn source_epsilon(const DenoiserBackend& backend, const std::string& prompt,
                         const EditConfig& cfg) {
  return [&backend, prompt, guidance = cfg.source_guidance](const Latent& x, int t, int) {
    if (prompt.empty()) return backend.predict(x, t, prompt).eps;
    const std::vector<std::string> prompts{std::string{}, prompt};
    auto out = backend.batch_predict(x, t, prompts);
    if (out.size() != 2) throw Error(ErrorCode::BackendError, "backend returned a short batch");
    return Latent(x.shape(), out[0].eps.values() +
                                 guidance * (out[1].eps.values() - out[0].eps.values()));
  };
}

InversionResult invert(const Latent& x0, const std::string& prompt, const EditConfig& cfg,
                       const DenoiserBackend& backend) {
  cfg.validate();
  if (!x0.all_finite()) throw Error(ErrorCode::NonFiniteLatent, "input latent is not finite");
  InversionResult inv{{}, cfg.start_index(),
                      SolverGrid::build(backend.capabilities().schedule, cfg.inversion_steps)};
  const int n = inv.steps();
  const EpsilonFn eps_fn = source_epsilon(backend, prompt, cfg);

  std::vector<Latent> levels;
  levels.reserve(static_cast<std::size_t>(n) + 1);
  levels.push_back(x0);
  DpmSolverPP solver(inv.grid);
  for (int k = 0; k < n; ++k) {
    const Latent& x = levels.back();
    Latent eps = eps_fn(x, solver.invert_query_timestep(k), k);
    levels.push_back(solver.invert_step(k, x, eps));
    require_finite(levels.back(), "inversion", k + 1);
  }
  inv.trajectory.assign(levels.rbegin(), levels.rend());
  return inv;
}

Latent denoise(const InversionResult& inv, const EpsilonFn& eps_fn) {
  const int n = inv.steps();
  Latent x = inv.start();
  DpmSolverPP solver(inv.grid);
  int step_index = 0;
  for (int level = n - inv.start_index; level >= 1; --level, ++step_index) {
    Latent eps = eps_fn(x, solver.denoise_query_timestep(level), step_index);
    x = solver.denoise_step(level, x, eps);
    require_finite(x, "denoising", level - 1);
  }
  return x;
}

EditResult edit_from(const InversionResult& inv, const EditPromptSet& prompts,
                     const EditConfig& cfg, const DenoiserBackend& backend) {
  cfg.validate();
  EditResult result{Latent{}, BinaryMask(inv.start().shape().spatial()), 0};
  result.latent = denoise(inv, [&](const Latent& x, int t, int step_index) {
    auto step = guidance_step(backend, x, t, prompts.intervention_prompt,
                              prompts.descendant_prompts, cfg, step_index);
    if (step.fired) {
      result.mask_union = result.mask_union || step.active;
      ++result.guided_steps;
    }
    return step.base + step.correction;
  });
  return result;
}

Latent reconstruct(const InversionResult& inv, const EditPromptSet& prompts, const EditConfig& cfg,
                   const DenoiserBackend& backend) {
  cfg.validate();
  return denoise(inv, [&](const Latent& x, int t, int step_index) {
    return guidance_step(backend, x, t, prompts.intervention_prompt, {}, cfg, step_index).base;
  });
}

EditResult edit(const Latent& x0, const std::string& prompt, const EditPromptSet& prompts,
                const EditConfig& cfg, const DenoiserBackend& backend) {
  return edit_from(invert(x0, prompt, cfg, backend), prompts, cfg, backend);
}

}  // namespace fmcgm

// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "fmcgm/csg/guidance.hpp"

#include <cmath>

namespace fmcgm {

void EditConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (!(edit_scale >= 0.0) || !std::isfinite(edit_scale)) fail("edit_scale must be >= 0");
  for (const auto& [id, s] : concept_scales) {
    if (!(s >= 0.0) || !std::isfinite(s)) fail("edit scale for '" + id + "' must be >= 0");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) fail("threshold must lie in (0,1)");
  if (warmup_steps < 0) fail("warmup_steps must be >= 0");
  if (inversion_steps < 1) throw Error(ErrorCode::InvalidSteps, "inversion_steps must be >= 1");
  if (!(skip_ratio >= 0.0 && skip_ratio < 1.0)) fail("skip_ratio must lie in [0,1)");
  if (!std::isfinite(source_guidance)) fail("source_guidance must be finite");
}

double EditConfig::scale_for(const std::string& concept_id) const {
  auto it = concept_scales.find(concept_id);
  return it == concept_scales.end() ? edit_scale : it->second;
}

int EditConfig::start_index() const {
  // The slack keeps 0.15 * 100 (= 15.000000000000002 in binary) at 15.
  return static_cast<int>(std::ceil(skip_ratio * inversion_steps - 1e-9));
}

Latent concept_direction(const DenoiserBackend& backend, const Latent& x_t, int timestep,
                         const std::string& prompt) {
  const std::vector<std::string> prompts{std::string{}, prompt};
  auto out = backend.batch_predict(x_t, timestep, prompts);
  if (out.size() != 2) throw Error(ErrorCode::BackendError, "backend returned a short batch");
  return concept_direction(out[1].eps, out[0].eps);
}

GuidanceStep guidance_step(const DenoiserBackend& backend, const Latent& x_t, int timestep,
                           const std::optional<std::string>& intervention_prompt,
                           const DescendantPrompts& descendant_prompts, const EditConfig& cfg,
                           int step_index) {
  const GridShape spatial = x_t.shape().spatial();
  GuidanceStep step{Latent{}, Latent::zeros(x_t.shape()), BinaryMask(spatial), false};
  const bool fire = step_index >= cfg.warmup_steps && !descendant_prompts.empty();
  const bool need_uncond = fire || (intervention_prompt && cfg.guide_base);

  std::vector<std::string> prompts;
  if (need_uncond) prompts.emplace_back();
  const std::size_t base_slot = prompts.size();
  if (intervention_prompt) prompts.push_back(*intervention_prompt);
  const std::size_t first_desc = prompts.size();
  if (fire) {
    for (const auto& [id, text] : descendant_prompts) prompts.push_back(text);
  }
  if (prompts.empty()) return step;

  auto out = backend.batch_predict(x_t, timestep, prompts);
  if (out.size() != prompts.size()) {
    throw Error(ErrorCode::BackendError, "backend returned " + std::to_string(out.size()) +
                                             " outputs for " + std::to_string(prompts.size()) +
                                             " prompts");
  }
  for (const auto& o : out) x_t.require_same_shape(o.eps);

  if (intervention_prompt) {
    step.base = out[base_slot].eps;
    if (cfg.guide_base) {
      step.base = out[0].eps + cfg.source_guidance * (out[base_slot].eps - out[0].eps);
    }
  }
  if (!fire) return step;

  const Latent& eps_uncond = out[0].eps;
  const BinaryMask m2 = noise_mask(eps_uncond, cfg.threshold);
  for (std::size_t i = 0; i < descendant_prompts.size(); ++i) {
    const PredictOutput& cond = out[first_desc + i];
    if (!cond.attention) {
      throw Error(ErrorCode::BackendError, "no attention map for prompt '" +
                                               descendant_prompts[i].second + "'");
    }
    cond.attention->validate();
    const BinaryMask m1 = attention_mask(*cond.attention, {0, cond.attention->token_maps.size()},
                                         cfg.threshold, spatial);
    step.correction += masked_direction(concept_direction(cond.eps, eps_uncond), m1, m2,
                                                cfg.scale_for(descendant_prompts[i].first),
                                                cfg.intersect_masks);
    step.active = step.active || (cfg.intersect_masks ? (m1 && m2) : m1);
  }
  step.fired = true;
  return step;
}

Latent concept_guidance(const DenoiserBackend& backend, const Latent& x_t, int timestep,
                        const DescendantPrompts& descendant_prompts, const EditConfig& cfg,
                        int step_index, BinaryMask* active) {
  auto step = guidance_step(backend, x_t, timestep, std::nullopt, descendant_prompts, cfg,
                            step_index);
  if (active) *active = std::move(step.active);
  return std::move(step.correction);
}

Latent guided_epsilon(const DenoiserBackend& backend, const Latent& x_t, int timestep,
                      const std::string& intervention_prompt,
                      const DescendantPrompts& descendant_prompts, const EditConfig& cfg,
                      int step_index) {
  auto step = guidance_step(backend, x_t, timestep, intervention_prompt, descendant_prompts, cfg,
                            step_index);
  return step.base + step.correction;
}

}  // namespace fmcgm

// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "fmcgm/backend/denoiser.hpp"

/// JSON encoding used by the diffusion service. Tensors travel as
/// {"shape": [...], "data_b64": base64(little-endian float32, row-major)}.
namespace fmcgm::wire {

using nlohmann::json;

std::string pack_f32(std::span<const double> values);
std::vector<double> unpack_f32(std::string_view b64, std::size_t expected_count);

json encode_latent(const Latent& latent);
/// Errors: BackendError on malformed payloads, ShapeMismatch if `expected`
/// is given and differs.
Latent decode_latent(const json& j, const LatentShape* expected = nullptr);

json encode_attention(const AttentionMap& attn);
AttentionMap decode_attention(const json& j, const GridShape* expected = nullptr);

json encode_capabilities(const BackendCapabilities& caps);
/// Accepts schedule.alphas, or schedule.alphas_cumprod, or
/// schedule.{kind, steps, beta_start, beta_end}.
BackendCapabilities decode_capabilities(const json& j);

json predict_request(const std::string& session, const Latent& latent, int timestep,
                     std::span<const std::string> prompts);
json predict_response(const std::vector<PredictOutput>& outputs);
/// Checks every output against the advertised shapes and prompt count.
std::vector<PredictOutput> parse_predict_response(const json& j, const BackendCapabilities& caps,
                                                  std::span<const std::string> prompts);

}  // namespace fmcgm::wire

// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "fmcgm/backend/remote_backend.hpp"

#include "fmcgm/backend/wire.hpp"
#include "fmcgm/util/codec.hpp"

namespace fmcgm {

RemoteBackend::RemoteBackend(RemoteOptions options)
    : options_(std::move(options)),
      client_(options_.base_url, options_.timeout),
      caps_(wire::decode_capabilities(client_.get("/v1/capabilities"))) {}

std::vector<PredictOutput> RemoteBackend::batch_predict(const Latent& latent, int timestep,
                                                        std::span<const std::string> prompts) const {
  check_inputs(latent, timestep);
  if (prompts.empty()) return {};
  const auto reply =
      client_.post("/v1/predict_noise", wire::predict_request(options_.session, latent, timestep, prompts));
  return wire::parse_predict_response(reply, caps_, prompts);
}

Latent RemoteBackend::encode(const Image& image) const {
  if (image.empty()) throw Error(ErrorCode::BackendError, "cannot encode an empty image");
  const auto reply = client_.post("/v1/encode", {{"image_png_b64", util::base64_encode(encode_png(image))}});
  const auto& payload = reply.contains("latent") ? reply.at("latent") : reply;
  return wire::decode_latent(payload, &caps_.latent_shape);
}

Image RemoteBackend::decode(const Latent& latent) const {
  if (!(latent.shape() == caps_.latent_shape)) {
    throw Error(ErrorCode::ShapeMismatch, "decode expects " + to_string(caps_.latent_shape));
  }
  const auto reply = client_.post("/v1/decode", {{"latent", wire::encode_latent(latent)}});
  if (!reply.contains("image_png_b64") || !reply.at("image_png_b64").is_string()) {
    throw Error(ErrorCode::BackendError, "/v1/decode reply lacks 'image_png_b64'");
  }
  try {
    return decode_image(util::base64_decode(reply.at("image_png_b64").get<std::string>()));
  } catch (const Error& e) {
    throw Error(ErrorCode::BackendError, "/v1/decode returned an undecodable image", e.what());
  }
}

}  // namespace fmcgm

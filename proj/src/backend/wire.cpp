// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "fmcgm/backend/wire.hpp"

#include <bit>
#include <cstdint>
#include <cstring>

#include "fmcgm/util/codec.hpp"

namespace fmcgm::wire {

namespace {

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorCode::BackendError, "malformed service payload: " + what);
}

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) malformed(std::string("missing '") + key + "'");
  return j.at(key);
}

std::vector<int> int_list(const json& j, const char* what) {
  if (!j.is_array()) malformed(std::string(what) + " must be an array");
  std::vector<int> out;
  for (const auto& v : j) {
    if (!v.is_number_integer()) malformed(std::string(what) + " must hold integers");
    out.push_back(v.get<int>());
  }
  return out;
}

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

}  // namespace

std::string pack_f32(std::span<const double> values) {
  util::Bytes bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint32_t bits = to_little(std::bit_cast<std::uint32_t>(static_cast<float>(values[i])));
    std::memcpy(bytes.data() + 4 * i, &bits, 4);
  }
  return util::base64_encode(bytes);
}

std::vector<double> unpack_f32(std::string_view b64, std::size_t expected_count) {
  util::Bytes bytes;
  try {
    bytes = util::base64_decode(b64);
  } catch (const Error&) {
    malformed("data_b64 is not base64");
  }
  if (bytes.size() != expected_count * 4) {
    throw Error(ErrorCode::ShapeMismatch, "payload holds " + std::to_string(bytes.size()) +
                                              " bytes, expected " +
                                              std::to_string(expected_count * 4));
  }
  std::vector<double> out(expected_count);
  for (std::size_t i = 0; i < expected_count; ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, bytes.data() + 4 * i, 4);
    out[i] = std::bit_cast<float>(to_little(bits));
  }
  return out;
}

json encode_latent(const Latent& latent) {
  const auto& s = latent.shape();
  return {{"shape", {s.channels, s.height, s.width}}, {"data_b64", pack_f32(latent.flat())}};
}

Latent decode_latent(const json& j, const LatentShape* expected) {
  const auto dims = int_list(field(j, "shape"), "shape");
  if (dims.size() != 3) malformed("latent shape must have 3 entries");
  const LatentShape shape{dims[0], dims[1], dims[2]};
  if (shape.channels < 1 || shape.height < 1 || shape.width < 1) malformed("latent shape must be positive");
  if (expected && !(shape == *expected)) {
    throw Error(ErrorCode::ShapeMismatch,
                "service sent " + to_string(shape) + ", advertised " + to_string(*expected));
  }
  const auto& data = field(j, "data_b64");
  if (!data.is_string()) malformed("data_b64 must be a string");
  const auto values = unpack_f32(data.get<std::string>(), shape.size());
  return Latent(shape, std::span<const double>(values));
}

json encode_attention(const AttentionMap& attn) {
  json maps = json::array();
  for (const auto& tm : attn.token_maps) {
    maps.push_back({{"span", {tm.begin, tm.end}},
                    {"data_b64", pack_f32({tm.grid.data(), static_cast<std::size_t>(tm.grid.size())})}});
  }
  return {{"resolution", {attn.resolution.height, attn.resolution.width}}, {"token_maps", maps}};
}

AttentionMap decode_attention(const json& j, const GridShape* expected) {
  const auto res = int_list(field(j, "resolution"), "resolution");
  if (res.size() != 2 || res[0] < 1 || res[1] < 1) malformed("resolution must be [h, w] > 0");
  AttentionMap out{GridShape{res[0], res[1]}, {}};
  if (expected && !(out.resolution == *expected)) {
    throw Error(ErrorCode::ShapeMismatch, "service sent attention at " + to_string(out.resolution) +
                                              ", advertised " + to_string(*expected));
  }
  const auto& maps = field(j, "token_maps");
  if (!maps.is_array()) malformed("token_maps must be an array");
  for (const auto& m : maps) {
    const auto span = int_list(field(m, "span"), "span");
    if (span.size() != 2 || span[0] < 0 || span[1] < span[0]) malformed("span must be [begin, end]");
    const auto& data = field(m, "data_b64");
    if (!data.is_string()) malformed("data_b64 must be a string");
    const auto values = unpack_f32(data.get<std::string>(), out.resolution.cells());
    TokenMap tm{span[0], span[1], Grid(out.resolution.height, out.resolution.width)};
    std::copy(values.begin(), values.end(), tm.grid.data());
    out.token_maps.push_back(std::move(tm));
  }
  out.validate();
  return out;
}

json encode_capabilities(const BackendCapabilities& caps) {
  const auto& a = caps.schedule.alphas();
  return {{"model", caps.model},
          {"latent_shape",
           {caps.latent_shape.channels, caps.latent_shape.height, caps.latent_shape.width}},
          {"attention_resolution",
           {caps.attention_resolution.height, caps.attention_resolution.width}},
          {"schedule", {{"alphas", std::vector<double>(a.data(), a.data() + a.size())}}}};
}

BackendCapabilities decode_capabilities(const json& j) {
  BackendCapabilities caps{"", {}, {}, make_schedule(1, ScheduleKind::Linear)};
  const auto& model = field(j, "model");
  if (!model.is_string()) malformed("model must be a string");
  caps.model = model.get<std::string>();
  const auto ls = int_list(field(j, "latent_shape"), "latent_shape");
  if (ls.size() != 3 || ls[0] < 1 || ls[1] < 1 || ls[2] < 1) malformed("latent_shape must be [c, h, w] > 0");
  caps.latent_shape = {ls[0], ls[1], ls[2]};
  const auto res = int_list(field(j, "attention_resolution"), "attention_resolution");
  if (res.size() != 2 || res[0] < 1 || res[1] < 1) malformed("attention_resolution must be [h, w] > 0");
  caps.attention_resolution = {res[0], res[1]};

  const auto& s = field(j, "schedule");
  try {
    if (s.contains("alphas")) {
      caps.schedule = NoiseSchedule::from_alphas(s.at("alphas").get<std::vector<double>>());
    } else if (s.contains("alphas_cumprod")) {
      const auto bars = s.at("alphas_cumprod").get<std::vector<double>>();
      std::vector<double> alphas(bars.size());
      for (std::size_t i = 0; i < bars.size(); ++i) alphas[i] = i == 0 ? bars[0] : bars[i] / bars[i - 1];
      caps.schedule = NoiseSchedule::from_alphas(std::move(alphas));
    } else {
      ScheduleParams p;
      p.beta_start = s.value("beta_start", p.beta_start);
      p.beta_end = s.value("beta_end", p.beta_end);
      caps.schedule = make_schedule(s.at("steps").get<int>(),
                                    parse_schedule_kind(s.at("kind").get<std::string>()), p);
    }
  } catch (const json::exception& e) {
    malformed(std::string("schedule: ") + e.what());
  }
  return caps;
}

json predict_request(const std::string& session, const Latent& latent, int timestep,
                     std::span<const std::string> prompts) {
  return {{"session", session},
          {"latent", encode_latent(latent)},
          {"timestep", timestep},
          {"prompts", std::vector<std::string>(prompts.begin(), prompts.end())}};
}

json predict_response(const std::vector<PredictOutput>& outputs) {
  json arr = json::array();
  for (const auto& o : outputs) {
    json item = {{"eps", encode_latent(o.eps)}};
    if (o.attention) item["attention"] = encode_attention(*o.attention);
    arr.push_back(std::move(item));
  }
  return {{"outputs", arr}};
}

std::vector<PredictOutput> parse_predict_response(const json& j, const BackendCapabilities& caps,
                                                  std::span<const std::string> prompts) {
  const auto& outputs = field(j, "outputs");
  if (!outputs.is_array()) malformed("outputs must be an array");
  if (outputs.size() != prompts.size()) {
    malformed(std::to_string(outputs.size()) + " outputs for " + std::to_string(prompts.size()) +
              " prompts");
  }
  std::vector<PredictOutput> out;
  out.reserve(outputs.size());
  for (const auto& o : outputs) {
    PredictOutput po;
    po.eps = decode_latent(field(o, "eps"), &caps.latent_shape);
    if (o.contains("attention") && !o.at("attention").is_null()) {
      po.attention = decode_attention(o.at("attention"), &caps.attention_resolution);
    }
    out.push_back(std::move(po));
  }
  return out;
}

}  // namespace fmcgm::wire

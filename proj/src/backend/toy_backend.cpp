// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "fmcgm/backend/toy_backend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "fmcgm/util/text.hpp"

namespace fmcgm {

void ToyWorld::validate() const {
  if (latent_shape.channels < 1 || latent_shape.height < 1 || latent_shape.width < 1) {
    throw Error(ErrorCode::InvalidArgument, "toy latent shape must be positive");
  }
  if (attention_resolution.height < 1 || attention_resolution.width < 1) {
    throw Error(ErrorCode::InvalidArgument, "toy attention resolution must be positive");
  }
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw Error(ErrorCode::InvalidArgument, "toy variance must be > 0");
  }
  if (base_mean.values().size() != 0 && !(base_mean.shape() == latent_shape)) {
    throw Error(ErrorCode::InvalidArgument, "toy base mean does not match the latent shape");
  }
  if (decode_scale < 1) throw Error(ErrorCode::InvalidArgument, "decode_scale must be >= 1");
  for (const auto& [prompt, c] : vocabulary) {
    const Rect& r = c.region;
    if (r.height < 1 || r.width < 1 || r.y < 0 || r.x < 0 || r.y + r.height > latent_shape.height ||
        r.x + r.width > latent_shape.width) {
      throw Error(ErrorCode::InvalidArgument, "region of '" + prompt + "' is out of bounds");
    }
    if (!(c.mean.shape() == latent_shape)) {
      throw Error(ErrorCode::InvalidArgument, "mean of '" + prompt + "' has the wrong shape");
    }
  }
}

ToyWorld& ToyWorld::add_shift_concept(const std::string& prompt, Rect region, double shift) {
  Latent mean = base_mean.values().size() ? base_mean : Latent::zeros(latent_shape);
  mean.values() += shift;
  vocabulary[prompt] = ToyConcept{std::move(mean), region};
  return *this;
}

ToyBackend::ToyBackend(ToyWorld world)
    : world_(std::move(world)),
      caps_{"toy-gaussian", world_.latent_shape, world_.attention_resolution,
            make_schedule(world_.schedule_steps, world_.schedule_kind, world_.schedule_params)} {
  if (world_.base_mean.values().size() == 0) world_.base_mean = Latent::zeros(world_.latent_shape);
  world_.validate();
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

std::optional<ToyConcept> ToyBackend::lookup(const std::string& prompt) const {
  if (util::trim(prompt).empty()) return std::nullopt;
  if (auto it = world_.vocabulary.find(prompt); it != world_.vocabulary.end()) return it->second;
  if (!world_.auto_vocabulary) return std::nullopt;

  const auto& s = world_.latent_shape;
  const std::uint64_t h = fnv1a(prompt);
  Rect r;
  r.height = std::min(s.height, 3 + static_cast<int>(h % 4));
  r.width = std::min(s.width, 3 + static_cast<int>((h >> 8) % 4));
  r.y = static_cast<int>((h >> 16) % static_cast<std::uint64_t>(s.height - r.height + 1));
  r.x = static_cast<int>((h >> 24) % static_cast<std::uint64_t>(s.width - r.width + 1));
  const double shift = ((h >> 40) & 1u) ? world_.auto_shift : -world_.auto_shift;
  Latent mean = world_.base_mean;
  mean.values() += shift;
  return ToyConcept{std::move(mean), r};
}

std::optional<Rect> ToyBackend::region_of(const std::string& prompt) const {
  auto c = lookup(prompt);
  if (!c) return std::nullopt;
  return c->region;
}

Latent ToyBackend::conditional_mean(const std::string& prompt) const {
  Latent mean = world_.base_mean;
  auto c = lookup(prompt);
  if (!c) return mean;
  const auto& s = world_.latent_shape;
  for (int ch = 0; ch < s.channels; ++ch) {
    for (int y = c->region.y; y < c->region.y + c->region.height; ++y) {
      for (int x = c->region.x; x < c->region.x + c->region.width; ++x) {
        mean(ch, y, x) = c->mean(ch, y, x);
      }
    }
  }
  return mean;
}

PredictOutput ToyBackend::predict(const Latent& latent, int timestep, const std::string& prompt) const {
  check_inputs(latent, timestep);
  const double ab = caps_.schedule.alpha_bar(timestep);
  const double a = std::sqrt(ab);
  const double s = std::sqrt(1.0 - ab);
  const Latent mean = conditional_mean(prompt);
  PredictOutput out;
  out.eps = Latent(latent.shape(),
                   s * (latent.values() - a * mean.values()) / (ab * world_.variance + (1.0 - ab)));

  if (util::trim(prompt).empty()) return out;
  const auto region = region_of(prompt);
  const GridShape res = world_.attention_resolution;
  const auto& ls = world_.latent_shape;
  Grid grid = Grid::Zero(res.height, res.width);
  if (region) {
    for (int i = 0; i < res.height; ++i) {
      const int ly = static_cast<int>((2LL * i + 1) * ls.height / (2LL * res.height));
      for (int j = 0; j < res.width; ++j) {
        const int lx = static_cast<int>((2LL * j + 1) * ls.width / (2LL * res.width));
        if (region->contains(ly, lx)) grid(i, j) = 1.0;
      }
    }
  }
  AttentionMap attn{res, {}};
  const auto tokens = util::split_words(prompt);
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    attn.token_maps.push_back({static_cast<int>(k), static_cast<int>(k + 1), grid});
  }
  out.attention = std::move(attn);
  return out;
}

std::vector<PredictOutput> ToyBackend::batch_predict(const Latent& latent, int timestep,
                                                     std::span<const std::string> prompts) const {
  std::vector<PredictOutput> out;
  out.reserve(prompts.size());
  for (const auto& p : prompts) out.push_back(predict(latent, timestep, p));
  return out;
}

Latent ToyBackend::encode(const Image& image) const {
  if (image.empty()) throw Error(ErrorCode::BackendError, "cannot encode an empty image");
  const auto& s = world_.latent_shape;
  const Image small = resize_image(image, s.width, s.height);
  const int colour = std::min(small.channels, 3);
  Latent out(s);
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      const std::uint8_t* px = &small.pixels[static_cast<std::size_t>((y * s.width + x) * small.channels)];
      double gray = 0.0;
      for (int c = 0; c < colour; ++c) gray += px[c];
      gray /= colour;
      for (int ch = 0; ch < s.channels; ++ch) {
        const double v = s.channels == 1 ? gray : px[ch % colour];
        out(ch, y, x) = v / 127.5 - 1.0;
      }
    }
  }
  return out;
}

Image ToyBackend::decode(const Latent& latent) const {
  if (!(latent.shape() == world_.latent_shape)) {
    throw Error(ErrorCode::ShapeMismatch, "decode expects " + to_string(world_.latent_shape));
  }
  const auto& s = latent.shape();
  const int k = world_.decode_scale;
  const int channels = s.channels >= 3 ? 3 : 1;
  Image img{s.width * k, s.height * k, channels, {}};
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < channels; ++c) {
        const double v = std::clamp(latent(c, y / k, x / k), -1.0, 1.0);
        img.pixels[static_cast<std::size_t>((y * img.width + x) * channels + c)] =
            static_cast<std::uint8_t>(std::lround((v + 1.0) * 127.5));
      }
    }
  }
  return img;
}

}  // namespace fmcgm

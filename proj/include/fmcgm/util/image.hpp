// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fmcgm/util/codec.hpp"

namespace fmcgm {

/// Decoded 8-bit image, interleaved channels (1 = gray, 3 = RGB, 4 = RGBA), row-major.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  [[nodiscard]] bool empty() const noexcept { return pixels.empty(); }
  bool operator==(const Image&) const = default;
};

/// Encoded bytes plus their media type, as sent to a model endpoint.
struct EncodedImage {
  util::Bytes bytes;
  std::string media_type;
};

Image decode_image(const util::Bytes& bytes);
util::Bytes encode_png(const Image& image);

/// Media type inferred from the leading magic bytes ("image/png", "image/jpeg", ...).
std::string sniff_media_type(const util::Bytes& bytes);

/// Area-resample to the given size; channel count is preserved.
Image resize_image(const Image& image, int width, int height);

}  // namespace fmcgm

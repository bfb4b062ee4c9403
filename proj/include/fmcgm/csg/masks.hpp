// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "fmcgm/csg/tensor.hpp"

namespace fmcgm {

/// Number of cells a threshold keeps: max(1, floor((1 - threshold) * n)).
/// A relative slack of 1e-9 absorbs binary rounding of (1 - threshold), so
/// threshold = 0.8 on 10 cells keeps 2, not 1.
std::size_t quantile_count(std::size_t n, double threshold);

/// Keeps the top quantile_count(n, threshold) cells of `values` (flat, row-major
/// over `shape`); equal values are ranked by lower flat index.
template <typename Scalar>
BinaryMask top_quantile_mask(std::span<const Scalar> values, GridShape shape, double threshold) {
  if (values.size() != shape.cells()) {
    throw Error(ErrorCode::ShapeMismatch, "grid values do not match " + to_string(shape));
  }
  if (!(threshold >= 0.0 && threshold < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "threshold must lie in [0,1)");
  }
  const std::size_t k = quantile_count(values.size(), threshold);
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto ranks_before = [&](std::size_t a, std::size_t b) {
    return values[a] > values[b] || (values[a] == values[b] && a < b);
  };
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1), order.end(),
                   ranks_before);
  BinaryMask mask(shape);
  for (std::size_t i = 0; i < k; ++i) mask.set(order[i]);
  return mask;
}

/// Nearest-neighbour resample of a grid to `target`.
template <typename Scalar>
GridT<Scalar> upsample_nearest(const GridT<Scalar>& grid, GridShape target) {
  if (grid.rows() == target.height && grid.cols() == target.width) return grid;
  GridT<Scalar> out(target.height, target.width);
  for (int y = 0; y < target.height; ++y) {
    const auto sy = static_cast<Eigen::Index>(static_cast<long long>(y) * grid.rows() / target.height);
    for (int x = 0; x < target.width; ++x) {
      const auto sx = static_cast<Eigen::Index>(static_cast<long long>(x) * grid.cols() / target.width);
      out(y, x) = grid(sy, sx);
    }
  }
  return out;
}

/// Attention mask: mean of the span's token grids, upsampled to `latent` resolution,
/// then the top (1 - threshold) quantile. Errors: EmptySpan.
template <typename Scalar>
BinaryMask attention_mask(const AttentionMapT<Scalar>& attn, TokenSpan span, double threshold,
                          GridShape latent) {
  if (span.begin >= span.end || span.end > attn.token_maps.size()) {
    throw Error(ErrorCode::EmptySpan, "token span [" + std::to_string(span.begin) + "," +
                                          std::to_string(span.end) + ") is empty or outside " +
                                          std::to_string(attn.token_maps.size()) + " token maps");
  }
  GridT<Scalar> mean = GridT<Scalar>::Zero(attn.resolution.height, attn.resolution.width);
  for (std::size_t i = span.begin; i < span.end; ++i) mean += attn.token_maps[i].grid;
  mean /= static_cast<Scalar>(span.end - span.begin);
  const GridT<Scalar> up = upsample_nearest(mean, latent);
  return top_quantile_mask(std::span<const Scalar>(up.data(), static_cast<std::size_t>(up.size())),
                           latent, threshold);
}

/// Noise mask: per-cell channel-L2 magnitude of the unconditional estimate, then the
/// same top (1 - threshold) quantile rule.
template <typename Scalar>
BinaryMask noise_mask(const LatentT<Scalar>& eps_uncond, double threshold) {
  const Eigen::Array<Scalar, 1, Eigen::Dynamic> magnitude =
      eps_uncond.values().matrix().colwise().norm().array();
  return top_quantile_mask(
      std::span<const Scalar>(magnitude.data(), static_cast<std::size_t>(magnitude.size())),
      eps_uncond.shape().spatial(), threshold);
}

}  // namespace fmcgm

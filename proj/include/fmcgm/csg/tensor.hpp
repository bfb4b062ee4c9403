// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fmcgm/error.hpp"

namespace fmcgm {

struct GridShape {
  int height = 0;
  int width = 0;

  [[nodiscard]] std::size_t cells() const noexcept {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  bool operator==(const GridShape&) const = default;
};

struct LatentShape {
  int channels = 0;
  int height = 0;
  int width = 0;

  [[nodiscard]] GridShape spatial() const noexcept { return {height, width}; }
  [[nodiscard]] std::size_t cells() const noexcept { return spatial().cells(); }
  [[nodiscard]] std::size_t size() const noexcept {
    return static_cast<std::size_t>(channels) * cells();
  }
  bool operator==(const LatentShape&) const = default;
};

std::string to_string(const LatentShape& s);
std::string to_string(const GridShape& s);

/// H x W spatial grid.
template <typename Scalar>
using GridT = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Grid = GridT<double>;

/// z_t / X_t: a (channels, height, width) tensor, row-major.
///
/// Stored as a channels x (height*width) Eigen array, so one row is one
/// channel's flattened plane and spatial masks broadcast with `rowwise()`.
template <typename Scalar>
class LatentT {
 public:
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  LatentT() = default;

  explicit LatentT(LatentShape shape) : shape_(shape) {
    check_shape(shape);
    values_ = Storage::Zero(shape.channels, static_cast<Eigen::Index>(shape.cells()));
  }

  LatentT(LatentShape shape, Storage values) : shape_(shape), values_(std::move(values)) {
    check_shape(shape);
    if (values_.rows() != shape.channels ||
        values_.cols() != static_cast<Eigen::Index>(shape.cells())) {
      throw Error(ErrorCode::ShapeMismatch, "storage does not match " + to_string(shape));
    }
  }

  LatentT(LatentShape shape, std::span<const Scalar> flat) : LatentT(shape) {
    if (flat.size() != shape.size()) {
      throw Error(ErrorCode::ShapeMismatch, std::to_string(flat.size()) +
                                                " values do not fill " + to_string(shape));
    }
    std::copy(flat.begin(), flat.end(), values_.data());
  }

  static LatentT zeros(LatentShape shape) { return LatentT(shape); }
  static LatentT constant(LatentShape shape, Scalar v) {
    LatentT out(shape);
    out.values_.setConstant(v);
    return out;
  }

  [[nodiscard]] const LatentShape& shape() const noexcept { return shape_; }
  [[nodiscard]] Storage& values() noexcept { return values_; }
  [[nodiscard]] const Storage& values() const noexcept { return values_; }

  [[nodiscard]] std::span<const Scalar> flat() const noexcept {
    return {values_.data(), static_cast<std::size_t>(values_.size())};
  }
  [[nodiscard]] std::span<Scalar> flat() noexcept {
    return {values_.data(), static_cast<std::size_t>(values_.size())};
  }

  Scalar& operator()(int c, int y, int x) { return values_(c, y * shape_.width + x); }
  Scalar operator()(int c, int y, int x) const { return values_(c, y * shape_.width + x); }

  [[nodiscard]] bool all_finite() const { return values_.allFinite(); }

  template <typename Other>
  [[nodiscard]] LatentT<Other> cast() const {
    return LatentT<Other>(shape_, values_.template cast<Other>());
  }

  LatentT& operator+=(const LatentT& o) {
    require_same_shape(o);
    values_ += o.values_;
    return *this;
  }
  LatentT& operator-=(const LatentT& o) {
    require_same_shape(o);
    values_ -= o.values_;
    return *this;
  }
  LatentT& operator*=(Scalar s) {
    values_ *= s;
    return *this;
  }

  friend LatentT operator+(LatentT a, const LatentT& b) { return a += b; }
  friend LatentT operator-(LatentT a, const LatentT& b) { return a -= b; }
  friend LatentT operator*(Scalar s, LatentT a) { return a *= s; }
  friend LatentT operator*(LatentT a, Scalar s) { return a *= s; }

  bool operator==(const LatentT& o) const {
    return shape_ == o.shape_ && (values_ == o.values_).all();
  }

  void require_same_shape(const LatentT& o) const {
    if (!(shape_ == o.shape_)) {
      throw Error(ErrorCode::ShapeMismatch, to_string(shape_) + " vs " + to_string(o.shape_));
    }
  }

 private:
  static void check_shape(const LatentShape& s) {
    if (s.channels < 1 || s.height < 1 || s.width < 1) {
      throw Error(ErrorCode::ShapeMismatch, "latent dimensions must be >= 1, got " + to_string(s));
    }
  }

  LatentShape shape_{};
  Storage values_;
};

using Latent = LatentT<double>;

/// Mean of squared differences.
template <typename Scalar>
Scalar mse(const LatentT<Scalar>& a, const LatentT<Scalar>& b) {
  a.require_same_shape(b);
  return (a.values() - b.values()).square().mean();
}

/// Cell-wise {0,1} mask over a spatial grid.
class BinaryMask {
 public:
  using Bits = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  BinaryMask() = default;
  explicit BinaryMask(GridShape shape, bool value = false)
      : shape_(shape), bits_(Bits::Constant(shape.height, shape.width, value)) {}
  BinaryMask(GridShape shape, Bits bits) : shape_(shape), bits_(std::move(bits)) {
    if (bits_.rows() != shape.height || bits_.cols() != shape.width) {
      throw Error(ErrorCode::ShapeMismatch, "mask bits do not match " + to_string(shape));
    }
  }

  [[nodiscard]] const GridShape& shape() const noexcept { return shape_; }
  [[nodiscard]] const Bits& bits() const noexcept { return bits_; }
  [[nodiscard]] Bits& bits() noexcept { return bits_; }

  [[nodiscard]] bool at(std::size_t flat_index) const { return bits_.data()[flat_index]; }
  void set(std::size_t flat_index, bool v = true) { bits_.data()[flat_index] = v; }

  [[nodiscard]] std::size_t popcount() const { return static_cast<std::size_t>(bits_.count()); }

  /// Row vector (1 x cells) of 0/1 suitable for broadcasting over latent channels.
  template <typename Scalar>
  [[nodiscard]] Eigen::Array<Scalar, 1, Eigen::Dynamic> as_row() const {
    return Eigen::Map<const Eigen::Array<bool, 1, Eigen::Dynamic>>(
               bits_.data(), static_cast<Eigen::Index>(shape_.cells()))
        .template cast<Scalar>();
  }

  friend BinaryMask operator&&(const BinaryMask& a, const BinaryMask& b) {
    require_same(a, b);
    return BinaryMask(a.shape_, a.bits_ && b.bits_);
  }
  friend BinaryMask operator||(const BinaryMask& a, const BinaryMask& b) {
    require_same(a, b);
    return BinaryMask(a.shape_, a.bits_ || b.bits_);
  }
  bool operator==(const BinaryMask& o) const {
    return shape_ == o.shape_ && (bits_ == o.bits_).all();
  }

 private:
  static void require_same(const BinaryMask& a, const BinaryMask& b) {
    if (!(a.shape_ == b.shape_)) {
      throw Error(ErrorCode::ShapeMismatch, "mask " + to_string(a.shape_) + " vs " +
                                                to_string(b.shape_));
    }
  }

  GridShape shape_{};
  Bits bits_;
};

/// Per-token cross-attention grids for one prompt. `span` is the half-open
/// range of prompt-token positions the grid belongs to.
template <typename Scalar>
struct TokenMapT {
  int begin = 0;
  int end = 0;
  GridT<Scalar> grid;
};

template <typename Scalar>
struct AttentionMapT {
  GridShape resolution{};
  std::vector<TokenMapT<Scalar>> token_maps;

  /// Throws BackendError unless every grid matches `resolution` and is
  /// finite and non-negative.
  void validate() const {
    for (const auto& tm : token_maps) {
      if (tm.grid.rows() != resolution.height || tm.grid.cols() != resolution.width) {
        throw Error(ErrorCode::BackendError, "attention grid does not match advertised " +
                                                 to_string(resolution));
      }
      if (!tm.grid.allFinite() || (tm.grid < Scalar(0)).any()) {
        throw Error(ErrorCode::BackendError, "attention grid has negative or non-finite cells");
      }
    }
  }
};

using TokenMap = TokenMapT<double>;
using AttentionMap = AttentionMapT<double>;

/// Half-open range over an AttentionMap's token_maps.
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

}  // namespace fmcgm

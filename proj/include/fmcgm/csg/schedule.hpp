// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string_view>
#include <vector>

#include "fmcgm/csg/tensor.hpp"

namespace fmcgm {

enum class ScheduleKind { Linear, ScaledLinear, BackendProvided };

ScheduleKind parse_schedule_kind(std::string_view name);
std::string_view to_string(ScheduleKind kind) noexcept;

struct ScheduleParams {
  double beta_start = 0.00085;
  double beta_end = 0.012;
  /// Per-step alphas, used by BackendProvided.
  std::vector<double> alphas;
};

/// Discrete-time forward process: alpha_bar(t) = prod_{i<=t} alpha_i, t = 1..T.
class NoiseSchedule {
 public:
  /// Errors: InvalidSteps if empty, any alpha outside (0,1], alpha_bar not
  /// strictly decreasing, or alpha_bar(T) outside (0,1).
  static NoiseSchedule from_alphas(std::vector<double> alphas);

  [[nodiscard]] int steps() const noexcept { return static_cast<int>(alphas_.size()); }
  [[nodiscard]] const Eigen::ArrayXd& alphas() const noexcept { return alphas_; }
  [[nodiscard]] const Eigen::ArrayXd& alpha_bars() const noexcept { return alpha_bars_; }
  /// 1-based, t in [1, T]. Throws InvalidSteps outside.
  [[nodiscard]] double alpha_bar(int t) const;

 private:
  NoiseSchedule() = default;
  Eigen::ArrayXd alphas_;
  Eigen::ArrayXd alpha_bars_;
};

/// Linear: beta linear in [beta_start, beta_end]. ScaledLinear: sqrt(beta)
/// linear (the latent-diffusion default). BackendProvided: params.alphas.
NoiseSchedule make_schedule(int steps, ScheduleKind kind, const ScheduleParams& params = {});

/// X_t = sqrt(alpha_bar_t) X_0 + sqrt(1 - alpha_bar_t) eps.
template <typename Scalar>
LatentT<Scalar> forward_diffuse(const LatentT<Scalar>& x0, const LatentT<Scalar>& eps,
                                Scalar alpha_bar) {
  x0.require_same_shape(eps);
  using std::sqrt;
  return LatentT<Scalar>(x0.shape(), sqrt(alpha_bar) * x0.values() +
                                         sqrt(Scalar(1) - alpha_bar) * eps.values());
}

template <typename Scalar>
LatentT<Scalar> forward_diffuse(const LatentT<Scalar>& x0, int t, const LatentT<Scalar>& eps,
                                const NoiseSchedule& sched) {
  return forward_diffuse(x0, eps, static_cast<Scalar>(sched.alpha_bar(t)));
}

}  // namespace fmcgm

// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include "fmcgm/csg/schedule.hpp"
#include "fmcgm/csg/tensor.hpp"

namespace fmcgm {

/// One noise level of the solver grid. Level 0 is clean data (alpha = 1,
/// sigma = 0); level k >= 1 sits at training timestep round(k * T / N).
struct SolverLevel {
  int timestep = 0;
  double alpha = 1.0;   // sqrt(alpha_bar)
  double sigma = 0.0;   // sqrt(1 - alpha_bar)
  double lambda = 0.0;  // log(alpha / sigma); +inf at level 0
};

class SolverGrid {
 public:
  /// Errors: InvalidSteps unless 1 <= steps <= schedule.steps().
  static SolverGrid build(const NoiseSchedule& schedule, int steps);

  [[nodiscard]] int steps() const noexcept { return static_cast<int>(levels_.size()) - 1; }
  [[nodiscard]] const SolverLevel& level(int k) const { return levels_.at(static_cast<std::size_t>(k)); }

 private:
  std::vector<SolverLevel> levels_;
};

/// Second-order multistep DPM-Solver++ in data-prediction form.
///
/// With D = (x - sigma_s eps) / alpha_s and h = lambda_t - lambda_s, a step
/// s -> t is
///     x_t = (sigma_t / sigma_s) x_s - alpha_t (exp(-h) - 1) D~,
/// where D~ = D on the first step and
///     D~ = (1 + 1/(2r)) D - 1/(2r) D_prev,  r = h_prev / h
/// afterwards. The same update run with h < 0 is the inversion direction.
/// The last denoising step lands on sigma = 0 and returns D directly; the
/// first inversion step leaves sigma = 0 as x_1 = alpha_1 x_0 + sigma_1 eps.
class DpmSolverPP {
 public:
  explicit DpmSolverPP(const SolverGrid& grid) : grid_(&grid) {}

  /// Timestep at which to query eps before stepping away from `level`.
  /// During inversion level 0 has no timestep, so level 1's is used.
  [[nodiscard]] int denoise_query_timestep(int level) const { return grid_->level(level).timestep; }
  [[nodiscard]] int invert_query_timestep(int level) const {
    return grid_->level(level == 0 ? 1 : level).timestep;
  }

  /// level -> level - 1.
  Latent denoise_step(int level, const Latent& x, const Latent& eps);
  /// level -> level + 1.
  Latent invert_step(int level, const Latent& x, const Latent& eps);

  /// Forget multistep history, e.g. when switching direction.
  void reset() { history_.reset(); }

 private:
  struct History {
    Latent data_prediction;
    double h;
  };

  Latent multistep(const SolverLevel& from, const SolverLevel& to, const Latent& x, const Latent& eps);

  const SolverGrid* grid_;
  std::optional<History> history_;
};

}  // namespace fmcgm

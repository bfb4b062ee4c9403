// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "fmcgm/csg/solver.hpp"

#include <cmath>
#include <limits>

namespace fmcgm {

SolverGrid SolverGrid::build(const NoiseSchedule& schedule, int steps) {
  const int T = schedule.steps();
  if (steps < 1 || steps > T) {
    throw Error(ErrorCode::InvalidSteps, "solver needs 1 <= steps <= " + std::to_string(T) +
                                             ", got " + std::to_string(steps));
  }
  SolverGrid grid;
  grid.levels_.push_back({0, 1.0, 0.0, std::numeric_limits<double>::infinity()});
  for (int k = 1; k <= steps; ++k) {
    const int t = static_cast<int>(std::lround(static_cast<double>(k) * T / steps));
    const double ab = schedule.alpha_bar(t);
    const double alpha = std::sqrt(ab);
    const double sigma = std::sqrt(1.0 - ab);
    grid.levels_.push_back({t, alpha, sigma, std::log(alpha) - std::log(sigma)});
  }
  return grid;
}

Latent DpmSolverPP::multistep(const SolverLevel& from, const SolverLevel& to, const Latent& x,
                              const Latent& eps) {
  x.require_same_shape(eps);
  Latent data(x.shape(), (x.values() - from.sigma * eps.values()) / from.alpha);
  Latent data_hat = data;
  const double h = to.lambda - from.lambda;
  if (history_) {
    const double r = history_->h / h;
    data_hat = Latent(x.shape(), (1.0 + 0.5 / r) * data.values() -
                                     (0.5 / r) * history_->data_prediction.values());
  }
  Latent next(x.shape(), (to.sigma / from.sigma) * x.values() -
                             (to.alpha * std::expm1(-h)) * data_hat.values());
  history_ = History{std::move(data), h};
  return next;
}

Latent DpmSolverPP::denoise_step(int level, const Latent& x, const Latent& eps) {
  if (level < 1 || level > grid_->steps()) {
    throw Error(ErrorCode::InvalidSteps, "cannot denoise from level " + std::to_string(level));
  }
  const SolverLevel& from = grid_->level(level);
  if (level == 1) {
    x.require_same_shape(eps);
    history_.reset();
    return Latent(x.shape(), (x.values() - from.sigma * eps.values()) / from.alpha);
  }
  return multistep(from, grid_->level(level - 1), x, eps);
}

Latent DpmSolverPP::invert_step(int level, const Latent& x, const Latent& eps) {
  if (level < 0 || level >= grid_->steps()) {
    throw Error(ErrorCode::InvalidSteps, "cannot invert from level " + std::to_string(level));
  }
  if (level == 0) {
    x.require_same_shape(eps);
    history_.reset();
    const SolverLevel& to = grid_->level(1);
    return Latent(x.shape(), to.alpha * x.values() + to.sigma * eps.values());
  }
  return multistep(grid_->level(level), grid_->level(level + 1), x, eps);
}

}  // namespace fmcgm

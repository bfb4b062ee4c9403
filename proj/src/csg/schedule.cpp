// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "fmcgm/csg/schedule.hpp"

#include <string>

namespace fmcgm {

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "linear") return ScheduleKind::Linear;
  if (name == "scaled_linear") return ScheduleKind::ScaledLinear;
  if (name == "backend_provided") return ScheduleKind::BackendProvided;
  throw Error(ErrorCode::InvalidArgument, "unknown schedule kind '" + std::string(name) + "'");
}

std::string_view to_string(ScheduleKind kind) noexcept {
  switch (kind) {
    case ScheduleKind::Linear: return "linear";
    case ScheduleKind::ScaledLinear: return "scaled_linear";
    case ScheduleKind::BackendProvided: return "backend_provided";
  }
  return "";
}

NoiseSchedule NoiseSchedule::from_alphas(std::vector<double> alphas) {
  if (alphas.empty()) throw Error(ErrorCode::InvalidSteps, "schedule needs at least one step");
  NoiseSchedule s;
  s.alphas_ = Eigen::Map<const Eigen::ArrayXd>(alphas.data(), static_cast<Eigen::Index>(alphas.size()));
  s.alpha_bars_.resize(s.alphas_.size());
  double running = 1.0;
  for (Eigen::Index i = 0; i < s.alphas_.size(); ++i) {
    const double a = s.alphas_[i];
    if (!(a > 0.0 && a <= 1.0)) {
      throw Error(ErrorCode::InvalidSteps, "alpha_" + std::to_string(i + 1) + " = " +
                                               std::to_string(a) + " is outside (0,1]");
    }
    const double next = running * a;
    if (i > 0 && !(next < running)) {
      throw Error(ErrorCode::InvalidSteps,
                  "alpha_bar is not strictly decreasing at t=" + std::to_string(i + 1));
    }
    s.alpha_bars_[i] = running = next;
  }
  const double last = s.alpha_bars_[s.alpha_bars_.size() - 1];
  if (!(last > 0.0 && last < 1.0)) {
    throw Error(ErrorCode::InvalidSteps, "alpha_bar(T) must lie in (0,1)");
  }
  return s;
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 1 || t > steps()) {
    throw Error(ErrorCode::InvalidSteps,
                "timestep " + std::to_string(t) + " outside [1," + std::to_string(steps()) + "]");
  }
  return alpha_bars_[t - 1];
}

NoiseSchedule make_schedule(int steps, ScheduleKind kind, const ScheduleParams& params) {
  if (steps < 1) throw Error(ErrorCode::InvalidSteps, "schedule needs T >= 1");
  if (kind == ScheduleKind::BackendProvided) {
    if (static_cast<int>(params.alphas.size()) != steps) {
      throw Error(ErrorCode::InvalidSteps, "backend schedule has " +
                                               std::to_string(params.alphas.size()) +
                                               " alphas, expected " + std::to_string(steps));
    }
    return NoiseSchedule::from_alphas(params.alphas);
  }
  std::vector<double> alphas(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
    double beta;
    if (kind == ScheduleKind::Linear) {
      beta = params.beta_start + frac * (params.beta_end - params.beta_start);
    } else {
      const double lo = std::sqrt(params.beta_start);
      const double hi = std::sqrt(params.beta_end);
      const double root = lo + frac * (hi - lo);
      beta = root * root;
    }
    alphas[static_cast<std::size_t>(i)] = 1.0 - beta;
  }
  return NoiseSchedule::from_alphas(std::move(alphas));
}

}  // namespace fmcgm

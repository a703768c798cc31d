#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>

#include "scas/error.hpp"

namespace scas {

enum class ScheduleMode { theoretical, fixed };

/// Step size eta_t and inner-loop length M_t for SCAS-ADMM (general convex).
///
/// theoretical:  K_t = nuL^2 D^2 + G_t^2,
///               eta_t = 1 / (K_t (t+1)^delta),  M_t = ceil(K_t (t+1)^(2 delta))
/// fixed:        eta_t = eta_override, M_t = m_override (default n)
struct Schedule {
  ScheduleMode mode = ScheduleMode::fixed;
  double delta = 1.5;
  std::optional<double> eta_override;
  std::optional<std::size_t> m_override;
  double nuL = 0.0;
  double D = 0.0;
};

struct StepPlan {
  double eta = 0.0;
  std::size_t M = 0;
};

inline StepPlan schedule_eta_M(const Schedule& sched, std::size_t t, double G_t,
                               std::size_t n = 0) {
  if (sched.mode == ScheduleMode::fixed) {
    if (!sched.eta_override) throw ConfigError("fixed schedule needs an eta");
    if (!(*sched.eta_override > 0.0)) throw ConfigError("fixed schedule: eta must be > 0");
    const std::size_t m = sched.m_override.value_or(n);
    if (m == 0) throw ConfigError("fixed schedule: M must be >= 1");
    return {*sched.eta_override, m};
  }
  if (!(sched.delta > 0.0)) throw ConfigError("theoretical schedule: delta must be > 0");
  const double k = sched.nuL * sched.nuL * sched.D * sched.D + G_t * G_t;
  if (!(k > 0.0) || !std::isfinite(k))
    throw ConfigError("theoretical schedule: nuL^2 D^2 + G_t^2 must be positive and finite");
  const double base = static_cast<double>(t + 1);
  const double m = std::ceil(k * std::pow(base, 2.0 * sched.delta));
  if (!(m < 9.0e15)) throw ConfigError("theoretical schedule: M_t overflows");
  return {1.0 / (k * std::pow(base, sched.delta)), static_cast<std::size_t>(std::max(m, 1.0))};
}

} // namespace scas

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "cardiomm/core/error.hpp"

namespace cardiomm {

/// Cosine decay with a linear warmup ramp, expressed in optimizer steps.
struct ScheduleSpec {
  double base_lr = 1e-4;
  double min_lr = 0.0;
  std::int64_t warmup_steps = 0;
  std::int64_t total_steps = 1;
};

inline void validate(const ScheduleSpec& s) {
  check_arg(s.total_steps >= 1, "schedule: total_steps must be >= 1");
  check_arg(s.warmup_steps >= 0 && s.warmup_steps < s.total_steps,
            "schedule: require 0 <= warmup_steps < total_steps");
  check_arg(s.base_lr >= s.min_lr && s.min_lr >= 0.0,
            "schedule: require base_lr >= min_lr >= 0");
}

/// lr(step): linear ramp 0 -> base_lr over warmup, then
/// min + 0.5*(base-min)*(1 + cos(pi * progress)). Steps past total clamp
/// to min_lr.
inline double cosine_lr(std::int64_t step, const ScheduleSpec& s) {
  validate(s);
  check_arg(step >= 0, "schedule: step must be >= 0");
  if (step >= s.total_steps) return s.min_lr;
  if (step < s.warmup_steps)
    return s.base_lr * static_cast<double>(step) /
           static_cast<double>(s.warmup_steps);
  double progress = static_cast<double>(step - s.warmup_steps) /
                    static_cast<double>(s.total_steps - s.warmup_steps);
  return s.min_lr + 0.5 * (s.base_lr - s.min_lr) *
                        (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace cardiomm

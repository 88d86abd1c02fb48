//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "chemlm/core/error.hpp"

namespace chemlm {

struct LrSchedule {
  enum class Kind { kConstant, kCosine };

  Kind kind = Kind::kConstant;
  double peak = 1e-3;
  long total_steps = 1;
  double final_fraction = 0.1;
  long warmup_steps = 0;

  static LrSchedule constant(double lr) { return { Kind::kConstant, lr, 1, 1.0, 0 }; }
  static LrSchedule cosine(double peak, long total_steps, double final_fraction = 0.1,
                           long warmup_steps = 0) {
    return { Kind::kCosine, peak, std::max(total_steps, 1L), final_fraction, warmup_steps };
  }

  // Rate for the update numbered `step` (0-based).
  double at(long step) const {
    if (warmup_steps > 0 && step < warmup_steps)
      return peak * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
    if (kind == Kind::kConstant)
      return peak;
    double span = static_cast<double>(std::max(total_steps - warmup_steps, 1L));
    double progress = std::clamp(static_cast<double>(step - warmup_steps) / span, 0.0, 1.0);
    double floor = peak * final_fraction;
    return floor + (peak - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  }

  friend bool operator==(const LrSchedule &, const LrSchedule &) = default;
};

template <class S>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  LrSchedule schedule;
  long step = 0;
  std::vector<S> m;
  std::vector<S> v;

  AdamState() = default;
  AdamState(std::size_t n, LrSchedule sched): schedule(sched), m(n, S(0)), v(n, S(0)) { }

  double current_lr() const { return schedule.at(step); }

  void update(std::vector<S> &params, const std::vector<S> &grad) {
    if (m.size() != params.size() || v.size() != params.size() || grad.size() != params.size())
      throw Error(ErrorCode::kShapeMismatch, "optimizer state does not match parameters");
    const double lr = schedule.at(step);
    ++step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    const S b1 = static_cast<S>(beta1), b2 = static_cast<S>(beta2);
    const S alpha = static_cast<S>(lr / c1);
    const S inv_c2 = static_cast<S>(1.0 / c2);
    const S e = static_cast<S>(eps);
    for (std::size_t k = 0; k < params.size(); ++k) {
      m[k] = b1 * m[k] + (S(1) - b1) * grad[k];
      v[k] = b2 * v[k] + (S(1) - b2) * grad[k] * grad[k];
      params[k] -= alpha * m[k] / (std::sqrt(v[k] * inv_c2) + e);
    }
  }
};

}  // namespace chemlm

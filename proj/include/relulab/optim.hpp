#pragma once

// Adam / AdamW with bias correction and the decaying step-size schedules
// used throughout the analysis.

#include <string>
#include <variant>

#include "relulab/net.hpp"

namespace relulab {

/// alpha_t = gamma / (t * max(ln t, ln 2)^{1+kappa}). Summable.
struct LogPowerSchedule {
  double gamma = 0.05;
  double kappa = 0.5;
};

/// alpha_t = c * t^{-eta}. Not summable for eta <= 1.
struct PowerSchedule {
  double c = 1e-2;
  double eta = 0.75;
};

using Schedule = std::variant<LogPowerSchedule, PowerSchedule>;

struct OptimConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Schedule schedule = LogPowerSchedule{};
  double weight_decay = 0.0;
  bool decoupled = true;

  void validate() const;
};

/// Hypotheses the convergence results rely on. Violations are reported, not rejected.
struct OptimFlags {
  bool beta_sum_below_one = false;      // beta1 + beta2 < 1
  bool beta1_below_sqrt_beta2 = false;  // beta1 < sqrt(beta2)
  bool summable_steps = false;          // sum alpha_t < inf
  bool divergent_steps = false;         // sum alpha_t = inf
};

OptimFlags optim_flags(const OptimConfig& config);

std::string schedule_name(const Schedule& schedule);

double schedule_alpha(long t, const OptimConfig& config);

/// sum_{t=1}^{T} alpha_t^2
double sum_alpha_squared(const OptimConfig& config, long T);

struct OptimState {
  Params m;
  Params v;
  long t = 0;

  static OptimState zeros_like(const Params& params) {
    return {Params::zeros_like(params), Params::zeros_like(params), 0};
  }
};

struct AdamResult {
  Params params;
  Params delta;  // params - old params, including any decoupled decay
  OptimState state;
  double alpha = 0.0;
};

/// One Adam step. The adaptive direction is m_hat / (sqrt(v_hat) + eps).
/// Coupled decay adds lambda*theta to the gradient; decoupled decay scales the
/// parameters by (1 - alpha_t * lambda) after the adaptive step.
AdamResult adam_step(const Params& params, const Params& grad, const OptimState& state,
                     const OptimConfig& config);

/// Same update without allocation: advances `params` and `state` and returns
/// alpha_t. `delta`, when given, receives the parameter change.
double adam_step_inplace(Params& params, const Params& grad, OptimState& state, const OptimConfig& config,
                         Params* delta = nullptr);

/// C_q = M / sqrt((1 - delta) * lambda_SE), the coordinate-velocity bound.
double velocity_bound(double M, double delta, double lambda_se);

}  // namespace relulab

#include "relulab/optim.hpp"

#include <cmath>
#include <numbers>

#include "relulab/errors.hpp"

namespace relulab {

namespace {
template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;
}  // namespace

void OptimConfig::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("optim.beta1 must lie in [0,1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("optim.beta2 must lie in [0,1)");
  if (!(epsilon >= 0.0)) throw ConfigError("optim.epsilon must be >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("optim.weight_decay must be >= 0");
  std::visit(overloaded{
                 [](const LogPowerSchedule& s) {
                   if (!(s.gamma > 0.0)) throw ConfigError("optim.gamma must be > 0");
                   if (!(s.kappa > 0.0)) throw ConfigError("optim.kappa must be > 0");
                 },
                 [](const PowerSchedule& s) {
                   if (!(s.c > 0.0)) throw ConfigError("optim.c must be > 0");
                   if (!(s.eta > 0.5 && s.eta < 1.0)) throw ConfigError("optim.eta must lie in (1/2, 1)");
                 },
             },
             schedule);
}

OptimFlags optim_flags(const OptimConfig& config) {
  OptimFlags f;
  f.beta_sum_below_one = config.beta1 + config.beta2 < 1.0;
  f.beta1_below_sqrt_beta2 = config.beta1 < std::sqrt(config.beta2);
  f.summable_steps = std::holds_alternative<LogPowerSchedule>(config.schedule);
  f.divergent_steps = !f.summable_steps;
  return f;
}

std::string schedule_name(const Schedule& schedule) {
  return std::holds_alternative<LogPowerSchedule>(schedule) ? "log_power" : "power";
}

double schedule_alpha(long t, const OptimConfig& config) {
  if (t < 1) throw DomainError("t", "schedule is defined for t >= 1");
  const auto tt = static_cast<double>(t);
  return std::visit(overloaded{
                        [tt](const LogPowerSchedule& s) {
                          const double lg = std::max(std::log(tt), std::numbers::ln2);
                          return s.gamma / (tt * std::pow(lg, 1.0 + s.kappa));
                        },
                        [tt](const PowerSchedule& s) { return s.c * std::pow(tt, -s.eta); },
                    },
                    config.schedule);
}

double sum_alpha_squared(const OptimConfig& config, long T) {
  // Summed from the small end to limit rounding error.
  double sum = 0.0;
  for (long t = T; t >= 1; --t) {
    const double a = schedule_alpha(t, config);
    sum += a * a;
  }
  return sum;
}

double adam_step_inplace(Params& params, const Params& grad, OptimState& state, const OptimConfig& config,
                         Params* delta) {
  if (!params.same_shape(grad) || !params.same_shape(state.m) || !params.same_shape(state.v) ||
      (delta && !params.same_shape(*delta))) {
    throw ShapeError("adam_step: params, grad and optimizer state differ in shape");
  }
  if (state.t < 0) throw DomainError("t", "optimizer step counter is negative");
  if (!grad.all_finite()) throw NumericError("non-finite gradient", state.t + 1);

  state.t += 1;
  const double alpha = schedule_alpha(state.t, config);
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  const double decay = config.weight_decay;
  const bool coupled = !config.decoupled && decay > 0.0;
  const double shrink = config.decoupled ? 1.0 - alpha * decay : 1.0;

  auto theta = params.flat();
  auto g = grad.flat();
  auto m = state.m.flat();
  auto v = state.v.flat();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double gi = coupled ? g[i] + decay * theta[i] : g[i];
    m[i] = b1 * m[i] + (1.0 - b1) * gi;
    v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    const double denom = std::sqrt(vhat) + config.epsilon;
    const double step = denom > 0.0 ? -alpha * mhat / denom : 0.0;
    const double next = (theta[i] + step) * shrink;
    if (delta) delta->flat()[i] = next - theta[i];
    theta[i] = next;
  }
  return alpha;
}

AdamResult adam_step(const Params& params, const Params& grad, const OptimState& state,
                     const OptimConfig& config) {
  AdamResult r{params, Params::zeros_like(params), state, 0.0};
  r.alpha = adam_step_inplace(r.params, grad, r.state, config, &r.delta);
  return r;
}

double velocity_bound(double M, double delta, double lambda_se) {
  if (!(lambda_se > 0.0)) throw DomainError("lambda_SE", "must be > 0");
  if (!(delta < 1.0)) throw DomainError("delta", "must be < 1");
  if (!(M >= 0.0)) throw DomainError("M", "must be >= 0");
  return M / std::sqrt((1.0 - delta) * lambda_se);
}

}  // namespace relulab

#pragma once

#include "compopt/accounting.hpp"
#include "compopt/estimators.hpp"
#include "compopt/problem.hpp"
#include "compopt/prox.hpp"
#include "compopt/scvrg.hpp"

#include <cmath>
#include <cstdint>
#include <optional>

namespace compopt {

/// Settings for the reference methods. Each method reads the fields it needs.
struct BaselineConfig {
  std::optional<double> step;  ///< AGD step; defaults to 1/ell
  double alpha0 = 0.1;         ///< SCGD / ASC-PG: alpha_t = alpha0 / t^p_x
  double beta0 = 1.0;          ///< SCGD / ASC-PG: beta_t = min(1, beta0 / t^p_y)
  double p_x = 0.75;
  double p_y = 0.5;
  std::uint64_t epoch_length = 0;  ///< VRSC-PG K; 0 means ⌈(m+n)^{2/3}⌉
  double eta = 0.01;               ///< VRSC-PG constant step
  std::size_t a = 5;
  std::size_t b = 5;
  std::uint64_t max_iterations = 10'000'000;
  std::optional<std::uint64_t> sample_budget;
  std::uint64_t seed = 0;
  std::size_t record_every = 0;
  IterateObserver on_iterate;

  void validate() const {
    if (step && !(*step > 0.0)) throw ConfigError("step must be > 0");
    if (!(alpha0 > 0.0) || !(beta0 > 0.0)) throw ConfigError("alpha0 and beta0 must be > 0");
    if (!(p_x >= 0.0) || !(p_y >= 0.0)) throw ConfigError("decay exponents must be >= 0");
    if (!(eta > 0.0)) throw ConfigError("eta must be > 0");
    if (a == 0 || b == 0) throw ConfigError("batch sizes must be >= 1");
    if (max_iterations == 0) throw ConfigError("iteration budget must be positive");
  }
};

/// Accelerated proximal gradient with full gradients and function-value
/// restart. Each iteration charges m + n samples; the objective values used
/// for the restart test are monitoring and are not charged.
inline RunResult run_agd(const CompositionProblem& problem, const BaselineConfig& config,
                         const ConstVectorRef& x0) {
  config.validate();
  detail::check_start(problem, x0);
  const auto& dims = problem.dims();
  const double step = config.step ? *config.step : 1.0 / lipschitz_bounds(problem).ell;
  const std::uint64_t per_iteration = dims.m + dims.n;

  SampleCounter counter;
  TraceRecorder recorder(problem, "agd", config.seed,
                         config.record_every ? config.record_every
                                             : record_interval(dims, per_iteration));
  recorder.record(0, 0, 0, x0);

  RunResult result;
  Vector x = x0;
  Vector y = x0;
  double t = 1.0;
  double phi = objective(problem, x);
  std::uint64_t it = 0;
  for (; it < config.max_iterations; ++it) {
    if (!counter.fits(per_iteration, config.sample_budget)) {
      result.truncated = true;
      break;
    }
    const Vector grad = full_gradient(problem, y);
    counter.charge(per_iteration);
    Vector next = prox_step(problem.regularizer(), y - step * grad, step);
    recorder.check_iterate(next);
    const double phi_next = objective(problem, next);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if (phi_next > phi) {
      t = 1.0;
      y = next;
    } else {
      y = next + ((t - 1.0) / t_next) * (next - x);
      t = t_next;
    }
    if (config.on_iterate) config.on_iterate(IterateEvent{0, it, it, step, x, next});
    x = std::move(next);
    phi = phi_next;
    recorder.maybe_record(0, static_cast<std::int64_t>(it + 1), counter.total(), x);
  }
  recorder.record(0, static_cast<std::int64_t>(it), counter.total(), x);
  result.x_out = x;
  result.samples = counter.total();
  result.trace = recorder.take_rows();
  return result;
}

namespace detail {

inline double decayed(double base, double exponent, std::uint64_t t) {
  return base / std::pow(static_cast<double>(t), exponent);
}

}  // namespace detail

/// Two-timescale stochastic compositional gradient. A running estimate y of
/// g(x) is updated with weight beta_t; x takes a proximal step of size
/// alpha_t along dg_j(x)^T grad f_i(y). Two samples per iteration.
inline RunResult run_scgd(const CompositionProblem& problem, const BaselineConfig& config,
                          const ConstVectorRef& x0) {
  config.validate();
  detail::check_start(problem, x0);
  const auto& dims = problem.dims();
  const CounterRng rng(config.seed);
  constexpr std::uint64_t per_iteration = 2;

  SampleCounter counter;
  TraceRecorder recorder(problem, "scgd", config.seed,
                         config.record_every ? config.record_every
                                             : record_interval(dims, per_iteration));
  recorder.record(0, 0, 0, x0);

  RunResult result;
  Vector x = x0;
  Vector y = Vector::Zero(dims.k);
  Vector gj(dims.k), grad(dims.k);
  Matrix jac(dims.k, dims.d);
  std::uint64_t t = 1;
  for (; t <= config.max_iterations; ++t) {
    if (!counter.fits(per_iteration, config.sample_budget)) {
      result.truncated = true;
      break;
    }
    const std::size_t j = rng.below(dims.m, 0, t, Stream::inner, 0);
    const std::size_t i = rng.below(dims.n, 0, t, Stream::outer, 0);
    problem.inner(j, x, gj, jac);
    // The first observation seeds the running average.
    const double beta = t == 1 ? 1.0 : std::min(1.0, detail::decayed(config.beta0, config.p_y, t));
    y = (1.0 - beta) * y + beta * gj;
    problem.outer(i, y, grad);
    counter.charge(per_iteration);
    const double alpha = detail::decayed(config.alpha0, config.p_x, t);
    Vector next = prox_step(problem.regularizer(), x - alpha * (jac.transpose() * grad), alpha);
    recorder.check_iterate(next);
    if (config.on_iterate) config.on_iterate(IterateEvent{0, t - 1, t - 1, alpha, x, next});
    x = std::move(next);
    recorder.maybe_record(0, static_cast<std::int64_t>(t), counter.total(), x);
  }
  recorder.record(0, static_cast<std::int64_t>(t - 1), counter.total(), x);
  result.x_out = x;
  result.samples = counter.total();
  result.trace = recorder.take_rows();
  return result;
}

/// Accelerated stochastic compositional proximal gradient: SCGD's proximal
/// step plus an extrapolated point z_{t+1} = x_t + (x_{t+1} − x_t)/beta_t at
/// which the running estimate y is refreshed. Three samples per iteration
/// (a Jacobian at x_t, an outer gradient, and a value at z_{t+1}) plus one
/// to seed y.
inline RunResult run_ascpg(const CompositionProblem& problem, const BaselineConfig& config,
                           const ConstVectorRef& x0) {
  config.validate();
  detail::check_start(problem, x0);
  const auto& dims = problem.dims();
  const CounterRng rng(config.seed);
  constexpr std::uint64_t per_iteration = 3;

  SampleCounter counter;
  TraceRecorder recorder(problem, "ascpg", config.seed,
                         config.record_every ? config.record_every
                                             : record_interval(dims, per_iteration));
  recorder.record(0, 0, 0, x0);

  RunResult result;
  Vector x = x0;
  Vector y(dims.k), gz(dims.k), grad(dims.k);
  Matrix jac(dims.k, dims.d);
  problem.inner_value(rng.below(dims.m, 0, 0, Stream::inner_extra, 0), x, y);
  counter.charge(1);
  std::uint64_t t = 1;
  for (; t <= config.max_iterations; ++t) {
    if (!counter.fits(per_iteration, config.sample_budget)) {
      result.truncated = true;
      break;
    }
    const std::size_t j = rng.below(dims.m, 0, t, Stream::inner, 0);
    const std::size_t i = rng.below(dims.n, 0, t, Stream::outer, 0);
    const std::size_t j2 = rng.below(dims.m, 0, t, Stream::inner_extra, 0);
    problem.inner(j, x, gz, jac);
    problem.outer(i, y, grad);
    const double alpha = detail::decayed(config.alpha0, config.p_x, t);
    const double beta = std::min(1.0, detail::decayed(config.beta0, config.p_y, t));
    Vector next = prox_step(problem.regularizer(), x - alpha * (jac.transpose() * grad), alpha);
    recorder.check_iterate(next);
    const Vector z = x + (next - x) / beta;
    problem.inner_value(j2, z, gz);
    y = (1.0 - beta) * y + beta * gz;
    counter.charge(per_iteration);
    if (config.on_iterate) config.on_iterate(IterateEvent{0, t - 1, t - 1, alpha, x, next});
    x = std::move(next);
    recorder.maybe_record(0, static_cast<std::int64_t>(t), counter.total(), x);
  }
  recorder.record(0, static_cast<std::int64_t>(t - 1), counter.total(), x);
  result.x_out = x;
  result.samples = counter.total();
  result.trace = recorder.take_rows();
  return result;
}

/// K = ⌈(m+n)^{2/3}⌉ unless overridden.
inline std::uint64_t vrscpg_epoch_length(const ProblemDims& dims, const BaselineConfig& config) {
  if (config.epoch_length != 0) return config.epoch_length;
  return static_cast<std::uint64_t>(
      std::ceil(std::cbrt(std::pow(static_cast<double>(dims.m + dims.n), 2.0)) - 1e-9));
}

/// Variance-reduced compositional proximal gradient with a constant epoch
/// length K and constant step. Uses the same estimators and inner loop as
/// SCVRG; the next snapshot is taken at the last iterate.
inline RunResult run_vrscpg(const CompositionProblem& problem, const BaselineConfig& config,
                            const ConstVectorRef& x0) {
  config.validate();
  detail::check_start(problem, x0);
  const auto& dims = problem.dims();
  const std::uint64_t K = vrscpg_epoch_length(dims, config);

  RunConfig inner_cfg;
  inner_cfg.eta = config.eta;
  inner_cfg.a = config.a;
  inner_cfg.b = config.b;
  inner_cfg.seed = config.seed;
  inner_cfg.schedule = StepMode::constant;
  inner_cfg.sample_budget = config.sample_budget;
  inner_cfg.on_iterate = config.on_iterate;
  inner_cfg.validate(dims);

  const CounterRng rng(config.seed);
  SampleCounter counter;
  TraceRecorder recorder(problem, "vrscpg", config.seed,
                         config.record_every ? config.record_every
                                             : record_interval(dims, config.a + config.b));
  EpochContext ctx{rng, counter, &recorder, 0};
  recorder.record(0, 0, 0, x0);
  StepSchedule schedule(config.eta, 1, StepMode::constant);

  RunResult result;
  Vector x = x0;
  for (std::uint64_t e = 0; ctx.global_iteration < config.max_iterations; ++e) {
    if (!counter.fits(dims.m + dims.n, config.sample_budget)) {
      result.truncated = true;
      break;
    }
    const EpochSnapshot snapshot = take_snapshot(problem, x, counter);
    const std::uint64_t k = std::min(K, config.max_iterations - ctx.global_iteration);
    EpochResult epoch = run_epoch(problem, snapshot, x, k, schedule, inner_cfg, e, ctx);
    x = epoch.x_last;
    if (epoch.truncated) {
      result.truncated = true;
      break;
    }
    result.epochs.push_back(EpochSummary{static_cast<std::int64_t>(e + 1), k, epoch.x_avg, x,
                                         epoch.last_step, counter.total()});
    recorder.record(static_cast<std::int64_t>(e + 1),
                    static_cast<std::int64_t>(ctx.global_iteration), counter.total(), x);
  }
  recorder.record(static_cast<std::int64_t>(result.epochs.size() + (result.truncated ? 1 : 0)),
                  static_cast<std::int64_t>(ctx.global_iteration), counter.total(), x);
  result.x_out = x;
  result.samples = counter.total();
  result.trace = recorder.take_rows();
  return result;
}

}  // namespace compopt

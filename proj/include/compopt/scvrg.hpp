#pragma once

#include "compopt/accounting.hpp"
#include "compopt/estimators.hpp"
#include "compopt/problem.hpp"
#include "compopt/prox.hpp"
#include "compopt/rng.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>

namespace compopt {

enum class StepMode { adaptive, constant };

/// η·√T / √max(2T − l, 1). The clamp keeps the last steps finite once the
/// counter reaches 2T; `l` may be −1 to name the step "before" the first one.
inline double step_size(double eta, std::uint64_t T, std::int64_t l) {
  const double remaining = static_cast<double>(2 * static_cast<std::int64_t>(T) - l);
  return eta * std::sqrt(static_cast<double>(T)) / std::sqrt(std::max(remaining, 1.0));
}

/// Global-counter step schedule shared by all epochs of one run. The step for
/// an update is read before the counter is incremented, so the first update
/// uses η√T/√(2T).
class StepSchedule {
 public:
  StepSchedule(double eta, std::uint64_t T, StepMode mode) : eta_(eta), T_(T), mode_(mode) {
    if (!(eta > 0.0)) throw ConfigError("step schedule: eta must be > 0");
    if (mode == StepMode::adaptive && T == 0) {
      throw ConfigError("step schedule: adaptive mode needs horizon T >= 1");
    }
  }

  double current() const { return at(static_cast<std::int64_t>(l_)); }
  double at(std::int64_t l) const {
    return mode_ == StepMode::constant ? eta_ : step_size(eta_, T_, l);
  }
  /// Returns the step for the next update and advances the counter.
  double next() {
    const double step = current();
    ++l_;
    return step;
  }

  std::uint64_t counter() const { return l_; }
  std::uint64_t horizon() const { return T_; }
  StepMode mode() const { return mode_; }

 private:
  double eta_;
  std::uint64_t T_;
  StepMode mode_;
  std::uint64_t l_ = 0;
};

/// Per-update hook; used by tests and diagnostics to watch the trajectory.
struct IterateEvent {
  std::int64_t epoch;        ///< 1-based epoch
  std::uint64_t t;           ///< inner index within the epoch
  std::uint64_t global_step; ///< counter value before the update
  double step;
  const Vector& x_before;
  const Vector& x_after;
};
using IterateObserver = std::function<void(const IterateEvent&)>;

/// Inputs of one SCVRG run.
struct RunConfig {
  std::uint64_t k0 = 10;    ///< first epoch length; epoch s+1 runs k0·2^{s+1} steps
  std::uint64_t epochs = 5; ///< S, number of epoch bodies
  double eta = 0.01;        ///< base step
  std::size_t a = 5;        ///< inner minibatch size
  std::size_t b = 5;        ///< outer minibatch size
  std::uint64_t seed = 0;
  StepMode schedule = StepMode::adaptive;
  BatchMode batch = BatchMode::with_replacement;
  std::optional<std::uint64_t> sample_budget;
  std::size_t record_every = 0;  ///< iterations between trace rows; 0 = about one per N samples
  IterateObserver on_iterate;

  void validate(const ProblemDims& dims) const {
    constexpr std::size_t kMaxBatch = (std::size_t{1} << 31) - 1;
    if (k0 == 0) throw ConfigError("k0 must be >= 1");
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("eta must be finite and > 0");
    if (a == 0 || b == 0) throw ConfigError("batch sizes a and b must be >= 1");
    if (a > kMaxBatch || b > kMaxBatch) throw ConfigError("batch sizes must be < 2^31");
    if (epochs > 40 || (k0 << (epochs + 1)) >> (epochs + 1) != k0) {
      throw ConfigError("k0 * 2^S overflows; reduce epochs");
    }
    if (batch == BatchMode::full_batch && (a != dims.m || b != dims.n)) {
      throw ConfigError("full-batch mode requires a = m and b = n");
    }
  }
};

/// Length of epoch s+1 (s is 0-based): k0·2^{s+1}.
inline std::uint64_t epoch_length(std::uint64_t k0, std::uint64_t s) { return k0 << (s + 1); }

/// Schedule horizon T = k0·2^S − k0; the S epoch bodies take 2T steps in total.
inline std::uint64_t schedule_horizon(std::uint64_t k0, std::uint64_t S) {
  return (k0 << S) - k0;
}

/// Exact sample charge of S complete epochs: sum_s (m + n + k_{s+1}(a + b)).
inline std::uint64_t planned_samples(const ProblemDims& dims, std::uint64_t k0, std::uint64_t S,
                                     std::size_t a, std::size_t b) {
  std::uint64_t total = 0;
  for (std::uint64_t s = 0; s < S; ++s) total += dims.m + dims.n + epoch_length(k0, s) * (a + b);
  return total;
}

/// Smallest S whose complete schedule spends at least `budget` samples.
inline std::uint64_t epochs_for_budget(const ProblemDims& dims, std::uint64_t k0, std::size_t a,
                                       std::size_t b, std::uint64_t budget) {
  std::uint64_t S = 1;
  while (planned_samples(dims, k0, S, a, b) < budget && S < 40) ++S;
  return S;
}

/// Quantities behind the worst-case parameter choice: distance and gap bounds
/// at x0, smoothness ell, target accuracy epsilon, and beta = ε / (90 ℓ D_x²).
struct WorstCaseParams {
  double D_x = 1.0;
  double D_Phi = 1.0;
  double ell = 1.0;
  double epsilon = 1.0;
  double beta = 0.0;

  static WorstCaseParams make(double D_x, double D_Phi, double ell, double epsilon) {
    if (!(D_x > 0.0) || !(D_Phi > 0.0) || !(ell > 0.0) || !(epsilon > 0.0)) {
      throw ConfigError("worst-case parameters must all be positive");
    }
    return WorstCaseParams{D_x, D_Phi, ell, epsilon, epsilon / (90.0 * ell * D_x * D_x)};
  }

  bool beta_in_range() const { return beta > 0.0 && beta < 1.0; }
};

/// Worst-case configuration: k0 = 10, S = ⌊log2((6 D_Φ + 15 ℓ D_x²)/ε)⌋ + 1
/// (at least 1), η = D_x² / (10 D_Φ + 25 ℓ D_x²), a = ⌈1620 ℓ² D_x⁴ / ε²⌉,
/// b = ⌈810 ℓ² D_x⁴ / ε²⌉.
inline RunConfig worst_case_config(double D_x, double D_Phi, double ell, double epsilon) {
  const WorstCaseParams p = WorstCaseParams::make(D_x, D_Phi, ell, epsilon);
  const double Dx2 = p.D_x * p.D_x;
  const double ratio = (6.0 * p.D_Phi + 15.0 * p.ell * Dx2) / p.epsilon;
  // ilogb is an exact floor(log2) for positive finite arguments.
  const int floor_log2 = std::ilogb(ratio);
  const double a_real = std::ceil(1620.0 * p.ell * p.ell * Dx2 * Dx2 / (p.epsilon * p.epsilon));
  const double b_real = std::ceil(810.0 * p.ell * p.ell * Dx2 * Dx2 / (p.epsilon * p.epsilon));
  constexpr double kMaxBatch = 2147483647.0;
  if (!(a_real <= kMaxBatch) || !(b_real <= kMaxBatch)) {
    throw ConfigError(
        "worst-case batch sizes overflow (epsilon too small); use a practical configuration "
        "such as k0=10, eta=0.01, a=b=5");
  }
  RunConfig cfg;
  cfg.k0 = 10;
  cfg.epochs = static_cast<std::uint64_t>(std::max(floor_log2 + 1, 1));
  cfg.eta = Dx2 / (10.0 * p.D_Phi + 25.0 * p.ell * Dx2);
  cfg.a = static_cast<std::size_t>(a_real);
  cfg.b = static_cast<std::size_t>(b_real);
  return cfg;
}

/// Result of one inner loop.
struct EpochResult {
  Vector x_avg;   ///< mean of the pre-update iterates x_0 .. x_{k-1}
  Vector x_last;  ///< x_k (or the last iterate reached when truncated)
  double last_step = 0.0;
  std::uint64_t iterations = 0;
  bool truncated = false;
};

/// Mutable state threaded through the epochs of one run.
struct EpochContext {
  const CounterRng& rng;
  SampleCounter& counter;
  TraceRecorder* recorder = nullptr;
  std::uint64_t global_iteration = 0;
};

/// Runs k iterations of the variance-reduced proximal update from x0 against
/// `snapshot`. `epoch` is the 0-based epoch index s (it keys the RNG).
inline EpochResult run_epoch(const CompositionProblem& problem, const EpochSnapshot& snapshot,
                             const ConstVectorRef& x0, std::uint64_t k, StepSchedule& schedule,
                             const RunConfig& config, std::uint64_t epoch, EpochContext& ctx) {
  if (k == 0) throw ConfigError("run_epoch: k must be >= 1");
  const auto& dims = problem.dims();
  const Regularizer& reg = problem.regularizer();
  const std::uint64_t per_iteration = config.a + config.b;

  EpochResult out;
  Vector x = x0;
  Vector sum = Vector::Zero(dims.d);
  for (std::uint64_t t = 0; t < k; ++t) {
    if (!ctx.counter.fits(per_iteration, config.sample_budget)) {
      out.truncated = true;
      break;
    }
    const MiniBatchDraw draw =
        draw_minibatch(ctx.rng, epoch, t, dims, config.a, config.b, config.batch);
    const Vector v = estimate_gradient(problem, snapshot, x, draw, ctx.counter);
    const std::uint64_t l = schedule.counter();
    const double step = schedule.next();
    Vector next = prox_step(reg, x - step * v, step);
    sum += x;
    ++out.iterations;
    ++ctx.global_iteration;
    out.last_step = step;
    if (ctx.recorder != nullptr) ctx.recorder->check_iterate(next);
    if (config.on_iterate) {
      config.on_iterate(IterateEvent{static_cast<std::int64_t>(epoch + 1), t, l, step, x, next});
    }
    x = std::move(next);
    if (ctx.recorder != nullptr) {
      ctx.recorder->maybe_record(static_cast<std::int64_t>(epoch + 1),
                                 static_cast<std::int64_t>(ctx.global_iteration),
                                 ctx.counter.total(), x);
    }
  }
  out.x_avg = out.iterations > 0 ? Vector(sum / static_cast<double>(out.iterations)) : Vector(x0);
  out.x_last = std::move(x);
  return out;
}

namespace detail {

inline void check_start(const CompositionProblem& problem, const ConstVectorRef& x0) {
  detail::check_point(problem, x0);
  if (!problem.regularizer().contains(x0)) {
    throw InfeasibleError("starting point lies outside the feasible box");
  }
}

}  // namespace detail

/// SCVRG: S epochs with doubling lengths; each epoch starts from the previous
/// epoch's last iterate and snapshots at the previous epoch's average. Returns
/// x̃^S, or the last iterate when the sample budget cuts the run short.
inline RunResult run_scvrg(const CompositionProblem& problem, const RunConfig& config,
                           const ConstVectorRef& x0, const std::string& tag = "scvrg") {
  const auto& dims = problem.dims();
  config.validate(dims);
  detail::check_start(problem, x0);

  const CounterRng rng(config.seed);
  SampleCounter counter;
  const std::size_t interval = config.record_every != 0
                                   ? config.record_every
                                   : record_interval(dims, config.a + config.b);
  TraceRecorder recorder(problem, tag, config.seed, interval);
  EpochContext ctx{rng, counter, &recorder, 0};
  recorder.record(0, 0, 0, x0);

  RunResult result;
  Vector reference = x0;
  Vector start = x0;
  if (config.epochs == 0) {
    result.x_out = x0;
    result.trace = recorder.take_rows();
    return result;
  }
  const std::uint64_t T = schedule_horizon(config.k0, config.epochs);
  StepSchedule schedule(config.eta, std::max<std::uint64_t>(T, 1), config.schedule);

  for (std::uint64_t s = 0; s < config.epochs; ++s) {
    if (!counter.fits(dims.m + dims.n, config.sample_budget)) {
      result.truncated = true;
      break;
    }
    const EpochSnapshot snapshot = take_snapshot(problem, reference, counter);
    const std::uint64_t k = epoch_length(config.k0, s);
    EpochResult epoch = run_epoch(problem, snapshot, start, k, schedule, config, s, ctx);
    start = epoch.x_last;
    if (epoch.truncated) {
      result.truncated = true;
      break;
    }
    reference = epoch.x_avg;
    result.epochs.push_back(EpochSummary{static_cast<std::int64_t>(s + 1), k, reference, start,
                                         epoch.last_step, counter.total()});
    recorder.record(static_cast<std::int64_t>(s + 1),
                    static_cast<std::int64_t>(ctx.global_iteration), counter.total(), reference);
  }
  result.x_out = result.truncated ? start : reference;
  if (result.truncated) {
    recorder.record(static_cast<std::int64_t>(result.epochs.size() + 1),
                    static_cast<std::int64_t>(ctx.global_iteration), counter.total(),
                    result.x_out);
  }
  result.samples = counter.total();
  result.trace = recorder.take_rows();
  return result;
}

}  // namespace compopt

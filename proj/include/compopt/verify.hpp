#pragma once

#include "compopt/estimators.hpp"
#include "compopt/problems.hpp"
#include "compopt/rng.hpp"
#include "compopt/scvrg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace compopt {

/// Outcome of one empirical check. `measured` is compared against `bound`
/// with the tolerance stated in `note`.
struct CheckReport {
  std::string name;
  bool pass = false;
  bool skipped = false;
  double measured = 0.0;
  double bound = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
  std::string note;
  std::vector<double> details;
};

/// Monte-Carlo slack on the variance bounds.
inline constexpr double kBoundSlack = 1.05;

/// Uniform points in [-radius, radius]^d keyed by (seed, index).
inline std::vector<Vector> random_box_points(std::size_t d, double radius, std::size_t count,
                                             std::uint64_t seed) {
  const CounterRng rng(seed);
  std::vector<Vector> pts;
  pts.reserve(count);
  for (std::size_t p = 0; p < count; ++p) {
    Vector x(d);
    for (std::size_t c = 0; c < d; ++c) {
      x[c] = radius * (2.0 * rng.uniform(7, p, Stream::check, c) - 1.0);
    }
    pts.push_back(std::move(x));
  }
  return pts;
}

/// Central differences of F against the analytic gradient; reports the
/// largest ||fd - grad|| / max(||grad||, 1e-8) over the points.
inline CheckReport check_gradient_fd(const CompositionProblem& problem,
                                     const std::vector<Vector>& points, double h = 1e-6,
                                     double tolerance = 1e-5) {
  if (!(h > 0.0)) throw ConfigError("finite-difference step must be > 0");
  CheckReport rep{"gradient_fd:" + problem.name(), false, false, 0.0, tolerance,
                  points.size(), 0, "max relative error vs central differences", {}};
  for (const Vector& x : points) {
    const Vector g = full_gradient(problem, x);
    const double step = h * (1.0 + x.norm());
    Vector fd(x.size());
    Vector xp = x, xm = x;
    for (Eigen::Index c = 0; c < x.size(); ++c) {
      xp[c] = x[c] + step;
      xm[c] = x[c] - step;
      fd[c] = (smooth_value(problem, xp) - smooth_value(problem, xm)) / (2.0 * step);
      xp[c] = x[c];
      xm[c] = x[c];
    }
    rep.measured = std::max(rep.measured, (fd - g).norm() / std::max(g.norm(), 1e-8));
  }
  rep.pass = rep.measured <= tolerance;
  return rep;
}

/// Averages u over all n^b equally likely outer draws and compares the mean to
/// grad F(x), relative to the larger of ||grad F(x)|| and ||ṽ||.
inline CheckReport check_unbiasedness(const CompositionProblem& problem,
                                      const EpochSnapshot& snapshot, const ConstVectorRef& x,
                                      std::size_t b, double tolerance = 1e-12) {
  const std::size_t n = problem.dims().n;
  if (n > 4 || b > 2 || b == 0) {
    throw ConfigError("exhaustive unbiasedness check needs n <= 4 and 1 <= b <= 2");
  }
  const InnerMean exact = inner_mean(problem, x);
  std::size_t draws = 1;
  for (std::size_t s = 0; s < b; ++s) draws *= n;
  Vector mean = Vector::Zero(problem.dims().d);
  std::vector<std::size_t> B(b);
  for (std::size_t code = 0; code < draws; ++code) {
    std::size_t rest = code;
    for (std::size_t s = 0; s < b; ++s) {
      B[s] = rest % n;
      rest /= n;
    }
    mean += unbiased_reference_gradient(problem, snapshot, exact, B);
  }
  mean /= static_cast<double>(draws);
  const Vector grad = full_gradient(problem, x);
  const double scale = std::max({grad.norm(), snapshot.v_tilde.norm(), 1e-300});
  CheckReport rep{"unbiasedness_b" + std::to_string(b), false, false, (mean - grad).norm() / scale, tolerance,
                  draws, 0, "exhaustive mean of u vs grad F", {}};
  rep.pass = rep.measured <= tolerance;
  return rep;
}

namespace detail {

struct MonteCarloMeans {
  double v_minus_u = 0.0;
  double u_minus_grad = 0.0;
  double v_minus_grad = 0.0;
};

/// Shared sampler for the variance checks. Each trial draws A and B from the
/// check stream; u uses the same B as v.
inline MonteCarloMeans monte_carlo(const CompositionProblem& problem,
                                   const EpochSnapshot& snapshot, const ConstVectorRef& x,
                                   std::size_t a, std::size_t b, std::uint64_t trials,
                                   std::uint64_t seed) {
  const auto& dims = problem.dims();
  const CounterRng rng(seed);
  const InnerMean exact = inner_mean(problem, x);
  const Vector grad = exact.jacobian.transpose() * outer_mean_gradient(problem, exact.value);
  std::vector<std::size_t> A(a), B(b);
  SampleCounter scratch;
  MonteCarloMeans out;
  for (std::uint64_t t = 0; t < trials; ++t) {
    for (std::size_t s = 0; s < a; ++s) A[s] = rng.below(dims.m, 0, t, Stream::inner, s);
    for (std::size_t s = 0; s < b; ++s) B[s] = rng.below(dims.n, 0, t, Stream::outer, s);
    const Vector v = estimate_gradient(problem, snapshot, x, A, B, scratch);
    const Vector u = unbiased_reference_gradient(problem, snapshot, exact, B);
    out.v_minus_u += (v - u).squaredNorm();
    out.u_minus_grad += (u - grad).squaredNorm();
    out.v_minus_grad += (v - grad).squaredNorm();
  }
  const double inv = 1.0 / static_cast<double>(trials);
  out.v_minus_u *= inv;
  out.u_minus_grad *= inv;
  out.v_minus_grad *= inv;
  return out;
}

inline void check_trials(std::uint64_t trials) {
  if (trials < 10000) throw ConfigError("Monte-Carlo checks need at least 10^4 trials");
}

inline bool dominated(double measured, double bound) {
  return measured <= kBoundSlack * bound || measured <= 1e-20;
}

}  // namespace detail

/// E||v - u||² against 2 ell² ||x - x̃||² / a. `details` holds the alternative
/// constant form (2 L_f² ell_g² + 2 L_g⁴ ell_f²) ||x - x̃||² / a.
inline CheckReport check_inner_variance(const CompositionProblem& problem, const EpochSnapshot& snapshot,
                                const ConstVectorRef& x, std::size_t a, std::size_t b,
                                std::uint64_t trials, std::uint64_t seed) {
  detail::check_trials(trials);
  const SmoothnessConstants c = lipschitz_bounds(problem);
  const double dist = (x - snapshot.x_tilde).squaredNorm();
  const double ad = static_cast<double>(a);
  const auto mc = detail::monte_carlo(problem, snapshot, x, a, b, trials, seed);
  CheckReport rep{"inner_variance", false, false, mc.v_minus_u, 2.0 * c.ell * c.ell * dist / ad, trials,
                  seed, "mean ||v-u||^2 <= 1.05 * 2 ell^2 ||x-x~||^2 / a", {}};
  rep.details.push_back(
      (2.0 * c.L_f * c.L_f * c.ell_g * c.ell_g + 2.0 * std::pow(c.L_g, 4) * c.ell_f * c.ell_f) *
      dist / ad);
  rep.pass = detail::dominated(rep.measured, rep.bound);
  return rep;
}

/// Ratio of E||v - u||² at inner batch 2a to that at a, over the same outer
/// draws; expected 1/2 within ±10%.
inline CheckReport check_inner_variance_scaling(const CompositionProblem& problem,
                                        const EpochSnapshot& snapshot, const ConstVectorRef& x,
                                        std::size_t a, std::size_t b, std::uint64_t trials,
                                        std::uint64_t seed) {
  detail::check_trials(trials);
  const auto base = detail::monte_carlo(problem, snapshot, x, a, b, trials, seed);
  const auto doubled = detail::monte_carlo(problem, snapshot, x, 2 * a, b, trials, seed);
  const double ratio = base.v_minus_u > 0.0 ? doubled.v_minus_u / base.v_minus_u : 0.0;
  CheckReport rep{"inner_variance_scaling", std::abs(ratio - 0.5) <= 0.05, false, ratio, 0.5, trials,
                  seed, "ratio of mean ||v-u||^2 at 2a and a, within 0.5 +/- 10%",
                  {base.v_minus_u, doubled.v_minus_u}};
  return rep;
}

namespace detail {

inline void require_optimum(const ProblemInstance& inst) {
  if (!inst.has_optimum()) throw ConfigError("this check needs a problem with a known optimum");
}

/// Shared right-hand-side pieces: Φ gaps and distances to x*.
struct OptimumTerms {
  double gap_sum;
  double dist_sum;
};

inline OptimumTerms optimum_terms(const ProblemInstance& inst, const EpochSnapshot& snapshot,
                                  const ConstVectorRef& x) {
  const CompositionProblem& p = *inst.problem;
  const double phi_star = *inst.phi_star;
  return OptimumTerms{
      (objective(p, x) - phi_star) + (objective(p, snapshot.x_tilde) - phi_star),
      (x - *inst.x_star).squaredNorm() + (snapshot.x_tilde - *inst.x_star).squaredNorm()};
}

}  // namespace detail

/// E||u - grad F(x)||² against
/// 16 ell (Φ(x) − Φ* + Φ(x̃) − Φ*)/b + 12 ell² (||x − x*||² + ||x̃ − x*||²)/b.
inline CheckReport check_reference_variance(const ProblemInstance& inst, const EpochSnapshot& snapshot,
                                const ConstVectorRef& x, std::size_t b, std::uint64_t trials,
                                std::uint64_t seed) {
  detail::require_optimum(inst);
  detail::check_trials(trials);
  const CompositionProblem& p = *inst.problem;
  const double ell = lipschitz_bounds(p).ell;
  const auto terms = detail::optimum_terms(inst, snapshot, x);
  const double bd = static_cast<double>(b);
  const auto mc = detail::monte_carlo(p, snapshot, x, 1, b, trials, seed);
  CheckReport rep{"reference_variance", false, false, mc.u_minus_grad,
                  16.0 * ell * terms.gap_sum / bd + 12.0 * ell * ell * terms.dist_sum / bd,
                  trials, seed, "mean ||u-grad F||^2 <= 1.05 * bound", {}};
  rep.pass = detail::dominated(rep.measured, rep.bound);
  return rep;
}

/// ||u - grad F(x)||² with B = [n], each index once; zero up to rounding.
inline CheckReport check_reference_variance_full_batch(const ProblemInstance& inst,
                                           const EpochSnapshot& snapshot,
                                           const ConstVectorRef& x) {
  detail::require_optimum(inst);
  const CompositionProblem& p = *inst.problem;
  std::vector<std::size_t> B(p.dims().n);
  for (std::size_t i = 0; i < B.size(); ++i) B[i] = i;
  const Vector u = unbiased_reference_gradient(p, snapshot, x, B);
  const double ell = lipschitz_bounds(p).ell;
  const auto terms = detail::optimum_terms(inst, snapshot, x);
  const double bd = static_cast<double>(B.size());
  CheckReport rep{"reference_variance_full_batch", false, false, (u - full_gradient(p, x)).squaredNorm(),
                  16.0 * ell * terms.gap_sum / bd + 12.0 * ell * ell * terms.dist_sum / bd, 1, 0,
                  "enumerated full batch", {}};
  rep.pass = rep.measured <= 1e-24 && rep.measured <= rep.bound + 1e-24;
  return rep;
}

/// E||v - grad F(x)||² against 16 ell/b (gaps) + (4 ell²/a + 12 ell²/b)(distances).
inline CheckReport check_estimator_variance(const ProblemInstance& inst, const EpochSnapshot& snapshot,
                                  const ConstVectorRef& x, std::size_t a, std::size_t b,
                                  std::uint64_t trials, std::uint64_t seed) {
  detail::require_optimum(inst);
  detail::check_trials(trials);
  const CompositionProblem& p = *inst.problem;
  const double ell = lipschitz_bounds(p).ell;
  const auto terms = detail::optimum_terms(inst, snapshot, x);
  const double ad = static_cast<double>(a), bd = static_cast<double>(b);
  const auto mc = detail::monte_carlo(p, snapshot, x, a, b, trials, seed);
  CheckReport rep{"estimator_variance", false, false, mc.v_minus_grad,
                  16.0 * ell * terms.gap_sum / bd +
                      (4.0 * ell * ell / ad + 12.0 * ell * ell / bd) * terms.dist_sum,
                  trials, seed, "mean ||v-grad F||^2 <= 1.05 * bound", {}};
  rep.pass = detail::dominated(rep.measured, rep.bound);
  return rep;
}

/// Potential values E_0..E_S of one SCVRG run:
///   E_s = Φ(x̃^s) − Φ* + (9 β ell / 2)||x* − x̃^s||²
///         + 3||x* − x_0^{s+1}||² / (4 η_0^{s+1} k_s) + 3(Φ(x_0^{s+1}) − Φ*) / (2 k_s),
/// with k_s = k0·2^s, x̃^0 = x_0^1 = x0, and η_0^{s+1} the last step taken
/// before epoch s+1 starts (the step at counter −1 for s = 0).
inline std::vector<double> epoch_potentials(const ProblemInstance& inst, const RunConfig& config,
                                            const RunResult& run, const ConstVectorRef& x0,
                                            double beta) {
  detail::require_optimum(inst);
  const CompositionProblem& p = *inst.problem;
  const double ell = lipschitz_bounds(p).ell;
  const Vector& xs = *inst.x_star;
  const double phi_star = *inst.phi_star;
  const std::uint64_t T = std::max<std::uint64_t>(schedule_horizon(config.k0, config.epochs), 1);
  const StepSchedule schedule(config.eta, T, config.schedule);

  std::vector<double> E;
  for (std::size_t s = 0; s <= run.epochs.size(); ++s) {
    const Vector& x_tilde = s == 0 ? Vector(x0) : run.epochs[s - 1].x_tilde;
    const Vector& x_start = s == 0 ? Vector(x0) : run.epochs[s - 1].x_last;
    const double step = s == 0 ? schedule.at(-1) : run.epochs[s - 1].last_step;
    const double k = static_cast<double>(config.k0 << s);
    E.push_back((objective(p, x_tilde) - phi_star) + 4.5 * beta * ell * (xs - x_tilde).squaredNorm() +
                3.0 * (xs - x_start).squaredNorm() / (4.0 * step * k) +
                3.0 * (objective(p, x_start) - phi_star) / (2.0 * k));
  }
  return E;
}

/// Which of the potential-contraction hypotheses hold for `config`.
inline std::string contraction_hypotheses_violation(const CompositionProblem& problem,
                                                    const RunConfig& config, double beta) {
  const double ell = lipschitz_bounds(problem).ell;
  const double T = static_cast<double>(schedule_horizon(config.k0, config.epochs));
  std::string why;
  if (config.batch != BatchMode::full_batch) {
    if (static_cast<double>(config.a) < 2.0 * ell * ell / (beta * beta)) why += "a < 2 ell^2/beta^2; ";
    if (static_cast<double>(config.b) < ell * ell / (beta * beta)) why += "b < ell^2/beta^2; ";
  }
  if (config.eta > std::min(1.0 / (30.0 * beta * T * ell), 1.0 / (25.0 * ell))) {
    why += "eta > min(1/(30 beta T ell), 1/(25 ell)); ";
  }
  return why;
}

/// Seed-averaged potential ratios Ê_{s+1}/Ê_s of SCVRG runs from x0. Passes
/// when every ratio is at most `threshold` (0.5 + 1e-6 deterministic, 0.75
/// seed-averaged). Reported as skipped when the hypotheses cannot be met.
inline CheckReport check_epoch_contraction(const ProblemInstance& inst, const RunConfig& config,
                                           const std::vector<std::uint64_t>& seeds,
                                           const ConstVectorRef& x0, double beta,
                                           std::optional<double> threshold = std::nullopt) {
  detail::require_optimum(inst);
  const CompositionProblem& p = *inst.problem;
  const bool deterministic = config.batch == BatchMode::full_batch;
  const double limit = threshold.value_or(deterministic ? 0.5 + 1e-6 : 0.75);
  CheckReport rep{deterministic ? "contraction_full_batch" : "contraction", false, false, 0.0,
                  limit, seeds.size(), seeds.empty() ? 0 : seeds.front(),
                  "max over epochs of seed-averaged E_{s+1}/E_s", {}};
  const std::string why = contraction_hypotheses_violation(p, config, beta);
  if (!why.empty()) {
    rep.skipped = true;
    rep.pass = true;
    rep.note = "skipped: " + why;
    return rep;
  }
  if (seeds.empty()) throw ConfigError("contraction check needs at least one seed");
  std::vector<double> avg(config.epochs + 1, 0.0);
  for (std::uint64_t seed : seeds) {
    RunConfig cfg = config;
    cfg.seed = seed;
    cfg.record_every = std::numeric_limits<std::size_t>::max();
    const RunResult run = run_scvrg(p, cfg, x0);
    const auto E = epoch_potentials(inst, cfg, run, x0, beta);
    for (std::size_t s = 0; s < E.size(); ++s) avg[s] += E[s] / static_cast<double>(seeds.size());
  }
  for (std::size_t s = 0; s + 1 < avg.size(); ++s) {
    const double ratio = avg[s] > 0.0 ? avg[s + 1] / avg[s] : 0.0;
    rep.details.push_back(ratio);
    rep.measured = std::max(rep.measured, ratio);
  }
  rep.pass = rep.measured <= limit;
  return rep;
}

/// Counts sampled midpoint-convexity violations of `fn` on the box:
/// fn((x+y)/2) > (fn(x)+fn(y))/2 + tol.
inline std::size_t midpoint_convexity_violations(const std::function<double(const Vector&)>& fn,
                                                 std::size_t d, double radius, std::size_t trials,
                                                 std::uint64_t seed, double tol = 1e-12) {
  const auto xs = random_box_points(d, radius, trials, seed);
  const auto ys = random_box_points(d, radius, trials, seed ^ 0x9e3779b97f4a7c15ULL);
  std::size_t bad = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const double mid = fn(0.5 * (xs[t] + ys[t]));
    if (mid > 0.5 * (fn(xs[t]) + fn(ys[t])) + tol) ++bad;
  }
  return bad;
}

/// A toy, configuration, start point and beta for the contraction check.
struct ContractionFixture {
  ProblemInstance instance;
  RunConfig config;
  Vector x0;
  double beta = 0.0;
};

/// Largest beta allowed by the step condition eta <= 1/(30 beta T ell).
inline double max_contraction_beta(const CompositionProblem& problem, const RunConfig& config) {
  const double ell = lipschitz_bounds(problem).ell;
  const double T = static_cast<double>(schedule_horizon(config.k0, config.epochs));
  return (1.0 - 1e-9) / (30.0 * config.eta * T * ell);
}

/// Two fixtures on the identity-inner quadratic: deterministic full batch
/// (centers at the origin, so Φ* = 0) and minibatch sizes large enough to meet
/// a >= 2 ell²/beta² and b >= ell²/beta² on a short schedule.
inline std::vector<ContractionFixture> contraction_fixtures() {
  std::vector<ContractionFixture> out;
  Vector x0(3);
  x0 << 0.8, -0.5, 0.3;
  {
    ToyOptions t;
    t.seed = 11;
    t.center_scale = 0.0;
    t.center_spread = 0.0;
    ContractionFixture f{build_toy(t), RunConfig{}, x0, 0.0};
    const double ell = lipschitz_bounds(*f.instance.problem).ell;
    f.config.k0 = 10;
    f.config.epochs = 5;
    f.config.eta = 1.0 / (25.0 * ell);
    f.config.a = t.m;
    f.config.b = t.n;
    f.config.batch = BatchMode::full_batch;
    f.beta = max_contraction_beta(*f.instance.problem, f.config);
    out.push_back(std::move(f));
  }
  {
    ToyOptions t;
    t.seed = 12;
    t.weight_spread = 0.1;
    ContractionFixture f{build_toy(t), RunConfig{}, x0, 0.0};
    const double ell = lipschitz_bounds(*f.instance.problem).ell;
    f.config.k0 = 2;
    f.config.epochs = 4;
    f.config.eta = 1.0 / (25.0 * ell);
    f.beta = max_contraction_beta(*f.instance.problem, f.config);
    const double ratio = ell / f.beta;
    f.config.a = static_cast<std::size_t>(std::ceil(2.0 * ratio * ratio));
    f.config.b = static_cast<std::size_t>(std::ceil(ratio * ratio));
    out.push_back(std::move(f));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Suite
// ---------------------------------------------------------------------------

struct SuiteOptions {
  std::uint64_t seed = 1;
  std::uint64_t trials = 100000;
  std::size_t contraction_seeds = 20;
};

/// Runs the full set of checks on fixed fixtures.
inline std::vector<CheckReport> run_check_suite(const SuiteOptions& opt = {}) {
  std::vector<CheckReport> out;

  // Gradient checks on every builder.
  {
    auto mv = build_mean_variance(synthetic_returns(50, 5, opt.seed), 1e-2, 1.0);
    out.push_back(check_gradient_fd(*mv, random_box_points(5, 1.0, 20, opt.seed)));
    const auto bell = build_bellman(random_bellman_spec(6, 5, 0.9, opt.seed));
    out.push_back(check_gradient_fd(*bell.problem, random_box_points(6, 5.0, 20, opt.seed)));
    for (ToyKind kind : {ToyKind::identity_quadratic, ToyKind::affine_quadratic, ToyKind::convex_sum}) {
      ToyOptions t;
      t.kind = kind;
      t.seed = opt.seed;
      const auto toy = build_toy(t);
      out.push_back(check_gradient_fd(*toy.problem, random_box_points(t.d, 1.0, 20, opt.seed)));
    }
  }

  ToyOptions affine;
  affine.kind = ToyKind::affine_quadratic;
  affine.m = 4;
  affine.n = 4;
  affine.seed = opt.seed;
  const ProblemInstance toy = build_toy(affine);
  const auto pts = random_box_points(affine.d, 1.0, 2, opt.seed + 1);
  const EpochSnapshot snap = take_snapshot(*toy.problem, pts[0]);

  {
    ToyOptions small = affine;
    small.n = 3;
    const auto t3 = build_toy(small);
    out.push_back(check_unbiasedness(*t3.problem, take_snapshot(*t3.problem, pts[0]), pts[1], 1));
    small.n = 2;
    const auto t2 = build_toy(small);
    out.push_back(check_unbiasedness(*t2.problem, take_snapshot(*t2.problem, pts[0]), pts[1], 2));
  }

  out.push_back(check_inner_variance(*toy.problem, snap, pts[1], 2, 2, opt.trials, opt.seed));
  out.push_back(check_inner_variance_scaling(*toy.problem, snap, pts[1], 2, 2, opt.trials, opt.seed));
  out.push_back(check_reference_variance(toy, snap, pts[1], 2, opt.trials, opt.seed));
  out.push_back(check_reference_variance_full_batch(toy, snap, pts[1]));
  out.push_back(check_estimator_variance(toy, snap, pts[1], 2, 2, opt.trials, opt.seed));

  for (const auto& c : contraction_fixtures()) {
    std::vector<std::uint64_t> seeds;
    const std::size_t count = c.config.batch == BatchMode::full_batch ? 1 : opt.contraction_seeds;
    for (std::size_t s = 0; s < count; ++s) seeds.push_back(opt.seed + s);
    out.push_back(check_epoch_contraction(c.instance, c.config, seeds, c.x0, c.beta));
  }
  return out;
}

inline void write_check_csv(std::ostream& out, const std::vector<CheckReport>& reports) {
  out << "name,pass,measured,bound,trials,seed\n";
  char buf[96];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%llu,%llu", r.pass ? 1 : 0, r.measured, r.bound,
                  static_cast<unsigned long long>(r.trials),
                  static_cast<unsigned long long>(r.seed));
    out << r.name << ',' << buf << '\n';
  }
}

inline void write_check_text(std::ostream& out, const std::vector<CheckReport>& reports) {
  char buf[160];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%-30s %-5s measured=%.6g bound=%.6g trials=%llu",
                  r.name.c_str(), r.skipped ? "SKIP" : (r.pass ? "PASS" : "FAIL"), r.measured,
                  r.bound, static_cast<unsigned long long>(r.trials));
    out << buf << "  " << r.note << '\n';
  }
}

}  // namespace compopt

#pragma once

#include "compopt/accounting.hpp"
#include "compopt/baselines.hpp"
#include "compopt/problems.hpp"
#include "compopt/scvrg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace compopt {

enum class Algorithm { scvrg, vrscpg, scgd, ascpg, agd };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::scvrg: return "scvrg";
    case Algorithm::vrscpg: return "vrscpg";
    case Algorithm::scgd: return "scgd";
    case Algorithm::ascpg: return "ascpg";
    case Algorithm::agd: return "agd";
  }
  return "unknown";
}

inline Algorithm parse_algorithm(const std::string& s) {
  for (Algorithm a : {Algorithm::scvrg, Algorithm::vrscpg, Algorithm::scgd, Algorithm::ascpg,
                      Algorithm::agd}) {
    if (to_string(a) == s) return a;
  }
  throw InputError("unknown algorithm '" + s + "'");
}

enum class ProblemKind { meanvar, bellman, toy };

inline ProblemKind parse_problem_kind(const std::string& s) {
  if (s == "meanvar") return ProblemKind::meanvar;
  if (s == "bellman") return ProblemKind::bellman;
  if (s == "toy") return ProblemKind::toy;
  throw InputError("unknown problem kind '" + s + "'");
}

inline ToyKind parse_toy_kind(const std::string& s) {
  if (s == "identity") return ToyKind::identity_quadratic;
  if (s == "affine") return ToyKind::affine_quadratic;
  if (s == "convex-sum") return ToyKind::convex_sum;
  throw InputError("unknown toy kind '" + s + "'");
}

/// What to optimise. Without a data path, mean-variance uses synthetic returns.
struct ProblemDescriptor {
  ProblemKind kind = ProblemKind::meanvar;
  std::string data_path;
  std::size_t rows = 2000;      ///< synthetic mean-variance N
  std::size_t assets = 25;      ///< synthetic mean-variance d
  std::size_t states = 10;      ///< Bellman
  std::size_t samples = 20;     ///< Bellman m
  double gamma = 0.9;           ///< Bellman
  ToyKind toy = ToyKind::identity_quadratic;
  std::size_t toy_m = 4, toy_n = 4, toy_d = 3;
  std::uint64_t problem_seed = 1;
  std::optional<double> lambda;  ///< default 1e-2 (0 for Bellman and the affine toy)
  std::optional<double> radius;  ///< default 1 (100 for Bellman)
};

inline ProblemInstance make_problem(const ProblemDescriptor& desc) {
  switch (desc.kind) {
    case ProblemKind::meanvar: {
      const ReturnsDataset ds = desc.data_path.empty()
                                    ? synthetic_returns(desc.rows, desc.assets, desc.problem_seed)
                                    : load_returns_csv(desc.data_path);
      return ProblemInstance{
          build_mean_variance(ds, desc.lambda.value_or(1e-2), desc.radius.value_or(1.0)),
          std::nullopt, std::nullopt};
    }
    case ProblemKind::bellman: {
      const BellmanSpec spec =
          random_bellman_spec(desc.states, desc.samples, desc.gamma, desc.problem_seed);
      return build_bellman(spec, Regularizer{desc.lambda.value_or(0.0), desc.radius.value_or(100.0)});
    }
    case ProblemKind::toy: {
      ToyOptions opt;
      opt.kind = desc.toy;
      opt.m = desc.toy_m;
      opt.n = desc.toy_n;
      opt.d = desc.toy_d;
      opt.seed = desc.problem_seed;
      opt.lambda = desc.lambda.value_or(desc.toy == ToyKind::affine_quadratic ? 0.0 : 1e-2);
      opt.radius = desc.radius.value_or(1.0);
      return build_toy(opt);
    }
  }
  throw InputError("unknown problem kind");
}

// ---------------------------------------------------------------------------
// Reference optimum
// ---------------------------------------------------------------------------

struct PhiStarResult {
  double value = 0.0;
  bool converged = false;
  Vector x;
};

/// Full-gradient accelerated proximal polish with restart and steps 1/ell.
/// Stops once the objective changes by less than `tol` on three successive
/// iterations.
inline PhiStarResult polish(const CompositionProblem& problem, const ConstVectorRef& x0,
                            std::uint64_t max_iterations = 20000, double tol = 1e-12) {
  const double step = 1.0 / lipschitz_bounds(problem).ell;
  const Regularizer& reg = problem.regularizer();
  Vector x = x0, y = x0;
  double t = 1.0;
  double phi = objective(problem, x);
  PhiStarResult out{phi, false, x};
  int quiet = 0;
  for (std::uint64_t it = 0; it < max_iterations; ++it) {
    Vector next = prox_step(reg, y - step * full_gradient(problem, y), step);
    const double phi_next = objective(problem, next);
    if (!std::isfinite(phi_next)) break;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if (phi_next > phi) {
      t = 1.0;
      y = next;
    } else {
      y = next + ((t - 1.0) / t_next) * (next - x);
      t = t_next;
    }
    quiet = std::abs(phi_next - phi) < tol ? quiet + 1 : 0;
    x = std::move(next);
    phi = phi_next;
    if (phi < out.value) {
      out.value = phi;
      out.x = x;
    }
    if (quiet >= 3) {
      out.converged = true;
      break;
    }
  }
  return out;
}

/// Long SCVRG run of about `budget` samples (at least 100(m+n)) followed by the
/// proximal polish; returns the smaller objective of the two.
inline PhiStarResult compute_phi_star(const CompositionProblem& problem, std::uint64_t budget,
                                      std::uint64_t polish_iterations = 20000) {
  const auto& dims = problem.dims();
  const std::uint64_t floor = 100 * (dims.m + dims.n);
  if (budget < floor) throw ConfigError("phi-star budget must be at least 100(m+n) samples");
  const double ell = lipschitz_bounds(problem).ell;
  RunConfig cfg;
  cfg.eta = 0.5 / ell;
  cfg.schedule = StepMode::constant;
  cfg.epochs = epochs_for_budget(dims, cfg.k0, cfg.a, cfg.b, budget);
  cfg.sample_budget = budget;
  cfg.record_every = std::numeric_limits<std::size_t>::max();
  const RunResult warm = run_scvrg(problem, cfg, Vector::Zero(dims.d), "phistar");
  const double warm_value = objective(problem, warm.x_out);
  PhiStarResult out = polish(problem, warm.x_out, polish_iterations);
  if (warm_value < out.value) {
    out.value = warm_value;
    out.x = warm.x_out;
  }
  return out;
}

inline std::string fingerprint_hex(std::uint64_t fp) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

/// compute_phi_star with a sidecar cache `phistar-<hash>.txt` in `cache_dir`.
inline PhiStarResult cached_phi_star(const CompositionProblem& problem, std::uint64_t budget,
                                     const std::filesystem::path& cache_dir) {
  const auto path = cache_dir / ("phistar-" + fingerprint_hex(problem.fingerprint()) + ".txt");
  {
    std::ifstream in(path);
    double value = 0.0;
    int converged = 0;
    if (in >> value >> converged && std::isfinite(value)) {
      return PhiStarResult{value, converged != 0, Vector()};
    }
  }
  PhiStarResult out = compute_phi_star(problem, budget);
  std::error_code ec;
  std::filesystem::create_directories(cache_dir, ec);
  std::ofstream cache(path);
  if (cache) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", out.value);
    cache << buf << ' ' << (out.converged ? 1 : 0) << '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

/// Per-algorithm settings. SCVRG's epoch count is derived from the budget
/// unless `scvrg_epochs` is set.
struct AlgorithmSettings {
  RunConfig scvrg;
  std::optional<std::uint64_t> scvrg_epochs;
  BaselineConfig baseline;
};

struct ExperimentSpec {
  ProblemDescriptor problem;
  std::vector<Algorithm> algorithms;
  AlgorithmSettings settings;
  double budget = 30.0;  ///< in units of N
  std::vector<std::uint64_t> seeds{1};
  std::string output;
  std::optional<std::string> cache_dir;
  std::optional<double> phi_star;  ///< skips the reference computation when given
  std::size_t max_rows = 10000;

  void validate() const {
    if (!(budget > 0.0) || !std::isfinite(budget)) throw ConfigError("budget must be > 0");
    if (algorithms.empty()) throw ConfigError("at least one algorithm is required");
    if (seeds.empty()) throw ConfigError("at least one seed is required");
  }
};

/// One (algorithm, seed) run of a benchmark.
struct RunOutcome {
  Algorithm algorithm = Algorithm::scvrg;
  std::uint64_t seed = 0;
  std::vector<TraceRecord> trace;
  Vector x_out;
  bool aborted = false;
  std::string message;

  double final_objective() const {
    for (auto it = trace.rbegin(); it != trace.rend(); ++it) {
      if (!it->aborted) return it->objective;
    }
    return std::numeric_limits<double>::quiet_NaN();
  }
};

struct BenchmarkResult {
  std::vector<RunOutcome> runs;
  double phi_star = 0.0;
  bool phi_star_converged = true;

  /// Mean final gap of an algorithm over its non-aborted runs.
  double mean_final_gap(Algorithm algorithm) const {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& r : runs) {
      if (r.algorithm != algorithm || r.aborted) continue;
      sum += r.final_objective() - phi_star;
      ++count;
    }
    return count ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
  }
};

/// Runs one algorithm under a sample budget from x0.
inline RunResult run_algorithm(const CompositionProblem& problem, Algorithm algorithm,
                               const AlgorithmSettings& settings, std::uint64_t seed,
                               std::uint64_t budget_samples, const ConstVectorRef& x0) {
  switch (algorithm) {
    case Algorithm::scvrg: {
      RunConfig cfg = settings.scvrg;
      cfg.seed = seed;
      cfg.sample_budget = budget_samples;
      cfg.epochs = settings.scvrg_epochs.value_or(
          epochs_for_budget(problem.dims(), cfg.k0, cfg.a, cfg.b, budget_samples));
      return run_scvrg(problem, cfg, x0);
    }
    default: break;
  }
  BaselineConfig cfg = settings.baseline;
  cfg.seed = seed;
  cfg.sample_budget = budget_samples;
  switch (algorithm) {
    case Algorithm::vrscpg: return run_vrscpg(problem, cfg, x0);
    case Algorithm::scgd: return run_scgd(problem, cfg, x0);
    case Algorithm::ascpg: return run_ascpg(problem, cfg, x0);
    case Algorithm::agd: return run_agd(problem, cfg, x0);
    case Algorithm::scvrg: break;
  }
  throw ConfigError("unknown algorithm");
}

inline constexpr const char* kTraceHeader =
    "algorithm,seed,epoch,iter,samples,samples_per_N,objective,gap";

inline void write_trace_header(std::ostream& out) { out << kTraceHeader << '\n'; }

inline void write_trace_rows(std::ostream& out, const std::vector<TraceRecord>& rows) {
  char buf[64];
  for (const auto& r : rows) {
    out << r.algorithm << ',' << r.seed << ',' << r.epoch << ',' << r.iteration << ','
        << r.samples << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.samples_per_n);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.objective);
    out << buf << ',';
    if (r.gap) {
      std::snprintf(buf, sizeof buf, "%.17g", *r.gap);
      out << buf;
    }
    out << '\n';
  }
}

/// Runs every (algorithm, seed) pair from x = 0, fills in gaps against Φ*, and
/// writes the trace CSV when an output path is set. Runs that diverge keep
/// their partial trace plus an abort marker row.
inline BenchmarkResult run_benchmark(const ExperimentSpec& spec) {
  spec.validate();
  const ProblemInstance inst = make_problem(spec.problem);
  const CompositionProblem& problem = *inst.problem;
  const auto& dims = problem.dims();
  const auto budget_samples =
      static_cast<std::uint64_t>(std::llround(spec.budget * static_cast<double>(dims.normalizer())));
  const Vector x0 = Vector::Zero(dims.d);

  BenchmarkResult result;
  for (Algorithm algorithm : spec.algorithms) {
    for (std::uint64_t seed : spec.seeds) {
      RunOutcome run{algorithm, seed, {}, x0, false, {}};
      try {
        RunResult r = run_algorithm(problem, algorithm, spec.settings, seed, budget_samples, x0);
        run.trace = decimate(std::move(r.trace), spec.max_rows);
        run.x_out = std::move(r.x_out);
      } catch (const DivergenceError& e) {
        run.aborted = true;
        run.message = e.what();
        run.trace = decimate(e.partial_trace(), spec.max_rows - 1);
        TraceRecord marker{to_string(algorithm), seed, -1, -1,
                           run.trace.empty() ? 0 : run.trace.back().samples, 0.0,
                           std::numeric_limits<double>::quiet_NaN(), std::nullopt, true};
        marker.samples_per_n =
            static_cast<double>(marker.samples) / static_cast<double>(dims.normalizer());
        run.trace.push_back(marker);
      }
      result.runs.push_back(std::move(run));
    }
  }

  double phi_star = 0.0;
  if (spec.phi_star) {
    phi_star = *spec.phi_star;
  } else if (inst.phi_star) {
    phi_star = *inst.phi_star;
  } else {
    const std::uint64_t budget = std::max<std::uint64_t>(
        100 * (dims.m + dims.n), 20 * budget_samples);
    const PhiStarResult ps = spec.cache_dir ? cached_phi_star(problem, budget, *spec.cache_dir)
                                            : compute_phi_star(problem, budget);
    phi_star = ps.value;
    result.phi_star_converged = ps.converged;
  }
  for (const auto& run : result.runs) {
    for (const auto& row : run.trace) {
      if (!row.aborted) phi_star = std::min(phi_star, row.objective);
    }
  }
  result.phi_star = phi_star;
  for (auto& run : result.runs) {
    for (auto& row : run.trace) {
      row.gap = row.aborted ? std::numeric_limits<double>::quiet_NaN() : row.objective - phi_star;
    }
  }
  if (!spec.output.empty()) {
    std::ofstream out(spec.output);
    if (!out) throw InputError("cannot write trace file '" + spec.output + "'");
    write_trace_header(out);
    for (const auto& run : result.runs) write_trace_rows(out, run.trace);
  }
  return result;
}

}  // namespace compopt

#pragma once

#include "compopt/harness.hpp"
#include "compopt/verify.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace compopt {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitInput = 1, kExitAbort = 2 };

namespace detail {

struct CliOptions {
  std::string problem = "meanvar";
  std::string data;
  std::optional<double> lambda;
  std::optional<double> radius;
  std::vector<std::string> algos{"scvrg"};
  std::uint64_t k0 = 10;
  std::optional<std::uint64_t> epochs;
  double eta = 0.01;
  double alpha0 = 0.1;
  double p_x = 0.75;
  std::optional<double> step;
  std::size_t a = 5;
  std::size_t b = 5;
  double budget = 30.0;
  std::vector<std::uint64_t> seeds{1};
  std::string schedule = "adaptive";
  std::string out;
  std::size_t rows = 2000;
  std::size_t assets = 25;
  std::uint64_t problem_seed = 1;
  std::string toy = "identity";
  std::string cache_dir;
  std::uint64_t trials = 100000;
};

inline void add_problem_flags(CLI::App& cmd, CliOptions& o) {
  cmd.add_option("--problem", o.problem, "meanvar, bellman or toy")
      ->check(CLI::IsMember({"meanvar", "bellman", "toy"}));
  cmd.add_option("--data", o.data, "returns CSV (meanvar); synthetic data when omitted");
  cmd.add_option("--lambda", o.lambda, "l1 weight");
  cmd.add_option("--radius", o.radius, "box radius R");
  cmd.add_option("--rows", o.rows, "synthetic returns: periods N");
  cmd.add_option("--assets", o.assets, "synthetic returns: assets d");
  cmd.add_option("--problem-seed", o.problem_seed, "seed for synthetic problem data");
  cmd.add_option("--toy", o.toy, "identity, affine or convex-sum")
      ->check(CLI::IsMember({"identity", "affine", "convex-sum"}));
}

inline void add_run_flags(CLI::App& cmd, CliOptions& o) {
  cmd.add_option("--algo", o.algos, "scvrg,vrscpg,scgd,ascpg,agd")->delimiter(',');
  cmd.add_option("--k0", o.k0, "first epoch length");
  cmd.add_option("--epochs", o.epochs, "SCVRG epochs S (default: fit the budget)");
  cmd.add_option("--eta", o.eta, "base step (SCVRG, VRSC-PG)");
  cmd.add_option("--alpha0", o.alpha0, "SCGD / ASC-PG step scale");
  cmd.add_option("--px", o.p_x, "SCGD / ASC-PG step decay exponent");
  cmd.add_option("--step", o.step, "AGD step (default 1/ell)");
  cmd.add_option("--a", o.a, "inner minibatch size");
  cmd.add_option("--b", o.b, "outer minibatch size");
  cmd.add_option("--budget", o.budget, "sample budget in units of N");
  cmd.add_option("--seed", o.seeds, "seed list")->delimiter(',');
  cmd.add_option("--schedule", o.schedule, "adaptive or constant")
      ->check(CLI::IsMember({"adaptive", "constant"}));
  cmd.add_option("--cache-dir", o.cache_dir, "directory for cached optimum values");
}

inline ProblemDescriptor descriptor(const CliOptions& o) {
  ProblemDescriptor d;
  d.kind = parse_problem_kind(o.problem);
  d.data_path = o.data;
  d.rows = o.rows;
  d.assets = o.assets;
  d.problem_seed = o.problem_seed;
  d.toy = parse_toy_kind(o.toy);
  d.lambda = o.lambda;
  d.radius = o.radius;
  return d;
}

inline ExperimentSpec experiment(const CliOptions& o) {
  ExperimentSpec spec;
  spec.problem = descriptor(o);
  for (const auto& a : o.algos) spec.algorithms.push_back(parse_algorithm(a));
  spec.budget = o.budget;
  spec.seeds = o.seeds;
  spec.output = o.out;
  if (!o.cache_dir.empty()) spec.cache_dir = o.cache_dir;
  RunConfig& s = spec.settings.scvrg;
  s.k0 = o.k0;
  s.eta = o.eta;
  s.a = o.a;
  s.b = o.b;
  s.schedule = o.schedule == "constant" ? StepMode::constant : StepMode::adaptive;
  spec.settings.scvrg_epochs = o.epochs;
  spec.settings.baseline.eta = o.eta;
  spec.settings.baseline.alpha0 = o.alpha0;
  spec.settings.baseline.p_x = o.p_x;
  spec.settings.baseline.step = o.step;
  spec.settings.baseline.a = o.a;
  spec.settings.baseline.b = o.b;
  return spec;
}

inline int report_benchmark(const BenchmarkResult& res, std::ostream& out, std::ostream& err) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "phi_star %.17g%s\n", res.phi_star,
                res.phi_star_converged ? "" : " (warning: polish did not converge)");
  out << buf;
  int code = kExitOk;
  for (const auto& r : res.runs) {
    if (r.aborted) {
      err << r.message << '\n';
      code = kExitAbort;
      continue;
    }
    std::snprintf(buf, sizeof buf, "%-7s seed %-4llu final objective %.10g gap %.4e\n",
                  to_string(r.algorithm).c_str(), static_cast<unsigned long long>(r.seed),
                  r.final_objective(), r.final_objective() - res.phi_star);
    out << buf;
  }
  return code;
}

}  // namespace detail

/// Entry point of the `compopt` tool; returns the process exit code.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"Stochastic compositional optimization with variance reduction", "compopt"};
  app.require_subcommand(1);
  detail::CliOptions o;

  auto* run = app.add_subcommand("run", "run one algorithm and write its trace");
  detail::add_problem_flags(*run, o);
  detail::add_run_flags(*run, o);
  run->add_option("--out", o.out, "trace CSV path");

  auto* bench = app.add_subcommand("bench", "run an algorithm suite over seeds");
  detail::add_problem_flags(*bench, o);
  detail::add_run_flags(*bench, o);
  bench->add_option("--out", o.out, "trace CSV path");

  auto* phistar = app.add_subcommand("phistar", "compute the reference optimum value");
  detail::add_problem_flags(*phistar, o);
  phistar->add_option("--budget", o.budget, "sample budget in units of N");
  phistar->add_option("--cache-dir", o.cache_dir, "directory for cached optimum values");

  auto* check = app.add_subcommand("check", "run the verification suite");
  check->add_option("--seed", o.seeds, "seed")->delimiter(',');
  check->add_option("--trials", o.trials, "Monte-Carlo trials (>= 10000)");
  check->add_option("--out", o.out, "report CSV path");

  auto* toygen = app.add_subcommand("toygen", "write a synthetic returns CSV");
  toygen->add_option("--rows", o.rows, "periods N");
  toygen->add_option("--assets", o.assets, "assets d");
  toygen->add_option("--problem-seed", o.problem_seed, "seed");
  toygen->add_option("--out", o.out, "output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitInput;
  }

  try {
    if (*run || *bench) {
      if (*run && (o.algos.size() != 1 || o.seeds.size() != 1)) {
        throw InputError("run takes exactly one --algo and one --seed");
      }
      const BenchmarkResult res = run_benchmark(detail::experiment(o));
      if (o.out.empty()) {
        write_trace_header(out);
        for (const auto& r : res.runs) write_trace_rows(out, r.trace);
        return res.runs.size() == 1 && res.runs[0].aborted ? kExitAbort : kExitOk;
      }
      return detail::report_benchmark(res, out, err);
    }
    if (*phistar) {
      const ProblemInstance inst = make_problem(detail::descriptor(o));
      const auto& dims = inst.problem->dims();
      const auto budget = std::max<std::uint64_t>(
          100 * (dims.m + dims.n),
          static_cast<std::uint64_t>(o.budget * static_cast<double>(dims.normalizer())));
      const PhiStarResult ps = o.cache_dir.empty()
                                   ? compute_phi_star(*inst.problem, budget)
                                   : cached_phi_star(*inst.problem, budget, o.cache_dir);
      char buf[96];
      std::snprintf(buf, sizeof buf, "%.17g", ps.value);
      out << buf << (ps.converged ? "" : " warning: polish did not converge") << '\n';
      return kExitOk;
    }
    if (*check) {
      SuiteOptions so;
      so.seed = o.seeds.front();
      so.trials = o.trials;
      const auto reports = run_check_suite(so);
      write_check_text(out, reports);
      if (!o.out.empty()) {
        std::ofstream csv(o.out);
        if (!csv) throw InputError("cannot write report '" + o.out + "'");
        write_check_csv(csv, reports);
      }
      for (const auto& r : reports) {
        if (!r.pass) return kExitInput;
      }
      return kExitOk;
    }
    if (*toygen) {
      write_returns_csv(o.out, synthetic_returns(o.rows, o.assets, o.problem_seed));
      return kExitOk;
    }
  } catch (const DivergenceError& e) {
    err << "aborted: " << e.what() << '\n';
    return kExitAbort;
  } catch (const NumericalError& e) {
    err << "aborted: " << e.what() << '\n';
    return kExitAbort;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitOk;
}

}  // namespace compopt

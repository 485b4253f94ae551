#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace compopt;
using compopt::testing::scalar_problem;
using compopt::testing::vec;

namespace {

ProblemInstance identity_toy(std::uint64_t seed = 4, double lambda = 0.05) {
  ToyOptions t;
  t.seed = seed;
  t.lambda = lambda;
  return build_toy(t);
}

/// Hand-rolled full-gradient proximal loop with the schedule counter.
std::vector<Vector> prox_gradient_oracle(const CompositionProblem& p, Vector x, double eta,
                                         std::uint64_t T, std::uint64_t steps, bool adaptive) {
  std::vector<Vector> path;
  for (std::uint64_t l = 0; l < steps; ++l) {
    const double step =
        adaptive ? eta * std::sqrt(double(T)) / std::sqrt(std::max(2.0 * T - double(l), 1.0)) : eta;
    x = prox_step(p.regularizer(), x - step * full_gradient(p, x), step);
    path.push_back(x);
  }
  return path;
}

}  // namespace

TEST(StepSize, ScheduleValues) {
  EXPECT_NEAR(step_size(0.01, 50, 0), 0.0070710678118654752, 1e-15);
  EXPECT_NEAR(step_size(0.01, 50, 50), 0.01, 1e-15);
  EXPECT_NEAR(step_size(0.01, 50, 99), 0.070710678118654752, 1e-15);
  EXPECT_NEAR(step_size(0.01, 50, 500), 0.070710678118654752, 1e-15);
}

TEST(StepSize, MonotoneAndConstantMode) {
  StepSchedule adaptive(0.1, 30, StepMode::adaptive);
  StepSchedule constant(0.1, 30, StepMode::constant);
  double last = 0.0;
  for (int i = 0; i < 80; ++i) {
    const double s = adaptive.next();
    EXPECT_GE(s, last);
    last = s;
    EXPECT_EQ(constant.next(), 0.1);
  }
  EXPECT_EQ(adaptive.counter(), 80u);
}

TEST(WorstCaseParams, PlugInValues) {
  const RunConfig c = worst_case_config(1.0, 1.0, 1.0, 10.5);
  EXPECT_EQ(c.epochs, 2u);
  EXPECT_NEAR(c.eta, 1.0 / 35.0, 1e-15);
  EXPECT_EQ(c.k0, 10u);
  const RunConfig d = worst_case_config(1.0, 1.0, 1.0, 1.0);
  EXPECT_EQ(d.a, 1620u);
  EXPECT_EQ(d.b, 810u);
  EXPECT_EQ(d.k0, 10u);
  EXPECT_NEAR(WorstCaseParams::make(1.0, 1.0, 1.0, 1.0).beta, 1.0 / 90.0, 1e-15);
}

TEST(WorstCaseParams, OverflowAndValidation) {
  EXPECT_THROW(worst_case_config(1.0, 1.0, 1.0, 1e-6), ConfigError);
  EXPECT_THROW(worst_case_config(0.0, 1.0, 1.0, 1.0), ConfigError);
  EXPECT_GE(worst_case_config(1.0, 1.0, 1.0, 1e3).epochs, 1u);
}

TEST(RunEpoch, SingleStepFromReference) {
  const auto p = scalar_problem(1.0, false, {0.0, 100.0});
  const Vector x0 = vec({3.0});
  const EpochSnapshot snap = take_snapshot(*p, x0);
  RunConfig cfg;
  cfg.a = 1;
  cfg.b = 1;
  StepSchedule schedule(0.1, 10, StepMode::adaptive);
  const double eta1 = schedule.at(0);
  const CounterRng rng(0);
  SampleCounter counter;
  EpochContext ctx{rng, counter, nullptr, 0};
  const EpochResult r = run_epoch(*p, snap, x0, 1, schedule, cfg, 0, ctx);
  EXPECT_DOUBLE_EQ(r.x_last[0], 3.0 - eta1 * 6.0);
  EXPECT_EQ(r.x_avg, x0);
  EXPECT_EQ(schedule.counter(), 1u);
}

TEST(RunEpoch, StationaryPointStays) {
  const auto toy = identity_toy(4, 0.0);
  const Vector& xs = *toy.x_star;
  const EpochSnapshot snap = take_snapshot(*toy.problem, xs);
  RunConfig cfg;
  StepSchedule schedule(0.05, 100, StepMode::adaptive);
  const CounterRng rng(5);
  SampleCounter counter;
  EpochContext ctx{rng, counter, nullptr, 0};
  const EpochResult r = run_epoch(*toy.problem, snap, xs, 25, schedule, cfg, 0, ctx);
  EXPECT_LE((r.x_last - xs).norm(), 1e-14);
  EXPECT_EQ(counter.total(), 25u * 10u);
}

TEST(RunScvrg, FullBatchMatchesProximalGradient) {
  ToyOptions t;
  t.kind = ToyKind::convex_sum;
  t.d = 4;
  t.lambda = 0.1;
  t.seed = 2;
  const auto toy = build_toy(t);
  const Vector x0 = vec({0.9, -0.8, 0.5, -0.1});
  for (StepMode mode : {StepMode::constant, StepMode::adaptive}) {
    RunConfig cfg;
    cfg.k0 = 10;
    cfg.epochs = 2;  // 20 + 40 iterations
    cfg.eta = 0.2;
    cfg.a = t.m;
    cfg.b = t.n;
    cfg.batch = BatchMode::full_batch;
    cfg.schedule = mode;
    std::vector<Vector> path;
    cfg.on_iterate = [&](const IterateEvent& e) { path.push_back(e.x_after); };
    run_scvrg(*toy.problem, cfg, x0);
    const auto oracle = prox_gradient_oracle(*toy.problem, x0, 0.2, schedule_horizon(10, 2), 60,
                                             mode == StepMode::adaptive);
    ASSERT_EQ(path.size(), oracle.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < 50; ++i) {
      worst = std::max(worst, (path[i] - oracle[i]).cwiseAbs().maxCoeff());
    }
    EXPECT_LE(worst, 1e-12);
  }
}

TEST(RunScvrg, EpochStructureAndAccounting) {
  const auto toy = identity_toy();
  RunConfig cfg;
  cfg.k0 = 3;
  cfg.epochs = 4;
  cfg.eta = 0.05;
  cfg.a = 2;
  cfg.b = 3;
  std::vector<std::int64_t> epochs;
  cfg.on_iterate = [&](const IterateEvent& e) { epochs.push_back(e.epoch); };
  const RunResult r = run_scvrg(*toy.problem, cfg, Vector::Zero(3));
  ASSERT_EQ(r.epochs.size(), 4u);
  std::uint64_t expected = 0;
  for (std::uint64_t s = 0; s < 4; ++s) {
    EXPECT_EQ(r.epochs[s].length, 3u << (s + 1));
    expected += 4 + 4 + (3u << (s + 1)) * 5;
    EXPECT_EQ(r.epochs[s].samples_after, expected);
  }
  EXPECT_EQ(r.samples, expected);
  EXPECT_EQ(r.samples, planned_samples(toy.problem->dims(), 3, 4, 2, 3));
  EXPECT_EQ(r.trace.back().samples, expected);
  EXPECT_EQ(epochs.size(), 2u * schedule_horizon(3, 4));
  EXPECT_EQ(r.x_out, r.epochs.back().x_tilde);
}

TEST(RunScvrg, EpochStartsFromLastIterateAndSnapshotsAtAverage) {
  const auto toy = identity_toy();
  RunConfig cfg;
  cfg.k0 = 2;
  cfg.epochs = 3;
  cfg.eta = 0.05;
  std::vector<Vector> before;
  std::vector<std::int64_t> epoch_of;
  cfg.on_iterate = [&](const IterateEvent& e) {
    before.push_back(e.x_before);
    epoch_of.push_back(e.epoch);
  };
  const RunResult r = run_scvrg(*toy.problem, cfg, Vector::Zero(3));
  std::size_t idx = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    const std::size_t k = r.epochs[s].length;
    Vector avg = Vector::Zero(3);
    for (std::size_t t = 0; t < k; ++t) avg += before[idx + t];
    avg /= static_cast<double>(k);
    EXPECT_LE((avg - r.epochs[s].x_tilde).norm(), 1e-15);
    if (s > 0) EXPECT_EQ(before[idx], r.epochs[s - 1].x_last);
    idx += k;
  }
}

TEST(RunScvrg, DeterministicAndSeedSensitive) {
  const auto toy = identity_toy();
  RunConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 17;
  const RunResult a = run_scvrg(*toy.problem, cfg, Vector::Zero(3));
  const RunResult b = run_scvrg(*toy.problem, cfg, Vector::Zero(3));
  EXPECT_EQ(a.x_out, b.x_out);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    EXPECT_EQ(a.trace[i].objective, b.trace[i].objective);
  }
  cfg.seed = 18;
  EXPECT_NE(run_scvrg(*toy.problem, cfg, Vector::Zero(3)).x_out, a.x_out);
}

TEST(RunScvrg, ZeroEpochsReturnsStart) {
  const auto toy = identity_toy();
  RunConfig cfg;
  cfg.epochs = 0;
  const Vector x0 = vec({0.1, 0.2, 0.3});
  const RunResult r = run_scvrg(*toy.problem, cfg, x0);
  EXPECT_EQ(r.x_out, x0);
  EXPECT_EQ(r.samples, 0u);
}

TEST(RunScvrg, IteratesStayFeasible) {
  ToyOptions t;
  t.center_scale = 3.0;
  t.radius = 0.5;
  const auto toy = build_toy(t);
  RunConfig cfg;
  cfg.epochs = 4;
  cfg.eta = 0.3;
  bool feasible = true;
  cfg.on_iterate = [&](const IterateEvent& e) {
    feasible = feasible && toy.problem->regularizer().contains(e.x_after);
  };
  run_scvrg(*toy.problem, cfg, Vector::Zero(3));
  EXPECT_TRUE(feasible);
}

TEST(RunScvrg, BudgetTruncationReturnsLastIterate) {
  const auto toy = identity_toy();
  RunConfig cfg;
  cfg.epochs = 6;
  cfg.sample_budget = 500;
  Vector last;
  cfg.on_iterate = [&](const IterateEvent& e) { last = e.x_after; };
  const RunResult r = run_scvrg(*toy.problem, cfg, Vector::Zero(3));
  EXPECT_TRUE(r.truncated);
  EXPECT_LE(r.samples, 500u);
  EXPECT_GT(r.samples + 10, 500u);
  EXPECT_EQ(r.x_out, last);
}

TEST(RunScvrg, GapDecreasesAcrossEpochs) {
  const auto toy = identity_toy(8, 0.02);
  RunConfig cfg;
  cfg.epochs = 5;
  cfg.eta = 0.05;
  std::vector<double> mean_gap(5, 0.0);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    cfg.seed = seed;
    const RunResult r = run_scvrg(*toy.problem, cfg, Vector::Zero(3));
    for (std::size_t s = 0; s < 5; ++s) {
      mean_gap[s] += (objective(*toy.problem, r.epochs[s].x_tilde) - *toy.phi_star) / 20.0;
    }
  }
  const double start = objective(*toy.problem, Vector::Zero(3)) - *toy.phi_star;
  EXPECT_LE(mean_gap[0], 0.5 * start);
  for (std::size_t s = 1; s < 5; ++s) EXPECT_LE(mean_gap[s], 0.5 * mean_gap[s - 1] + 1e-14);
}

TEST(RunScvrg, RejectsBadConfigAndInfeasibleStart) {
  const auto toy = identity_toy();
  RunConfig cfg;
  cfg.k0 = 0;
  EXPECT_THROW(run_scvrg(*toy.problem, cfg, Vector::Zero(3)), ConfigError);
  cfg = RunConfig{};
  cfg.a = 0;
  EXPECT_THROW(run_scvrg(*toy.problem, cfg, Vector::Zero(3)), ConfigError);
  cfg = RunConfig{};
  EXPECT_THROW(run_scvrg(*toy.problem, cfg, Vector::Constant(3, 2.0)), InfeasibleError);
}

TEST(RunScvrg, DivergenceAbortsWithPartialTrace) {
  const auto p = scalar_problem(1.0, false, {0.0, 1e9});
  RunConfig cfg;
  cfg.k0 = 5;
  cfg.epochs = 3;
  cfg.eta = 5.0;
  cfg.a = 1;
  cfg.b = 1;
  cfg.record_every = 1;
  try {
    run_scvrg(*p, cfg, vec({1.0}));
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_FALSE(e.partial_trace().empty());
  }
}

TEST(Accounting, EpochsForBudget) {
  const ProblemDims dims{100, 100, 3, 3};
  const std::uint64_t S = epochs_for_budget(dims, 10, 5, 5, 3000);
  EXPECT_GE(planned_samples(dims, 10, S, 5, 5), 3000u);
  EXPECT_LT(planned_samples(dims, 10, S - 1, 5, 5), 3000u);
}

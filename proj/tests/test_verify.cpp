#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace compopt;
using compopt::testing::scalar_problem;
using compopt::testing::vec;

namespace {

ProblemInstance affine_toy(std::uint64_t seed = 1) {
  ToyOptions t;
  t.kind = ToyKind::affine_quadratic;
  t.seed = seed;
  return build_toy(t);
}

}  // namespace

TEST(Verify, FiniteDifferencesCatchWrongGradient) {
  LambdaProblem bad(
      ProblemDims{1, 1, 1, 1}, Regularizer{0.0, 10.0},
      [](std::size_t, const ConstVectorRef& x, VectorRef v, MatrixRef jac) {
        v = x;
        jac(0, 0) = 1.0;
      },
      [](std::size_t, const ConstVectorRef& y, VectorRef g) {
        g[0] = 3.0 * y[0];
        return y[0] * y[0];
      });
  EXPECT_FALSE(check_gradient_fd(bad, random_box_points(1, 1.0, 5, 1)).pass);
  EXPECT_TRUE(check_gradient_fd(*scalar_problem(1.0, false), random_box_points(1, 1.0, 5, 1)).pass);
}

TEST(Verify, BoxPointsAreInsideAndKeyed) {
  const auto a = random_box_points(4, 2.0, 100, 3);
  const auto b = random_box_points(4, 2.0, 100, 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i], b[i]);
    EXPECT_LE(a[i].cwiseAbs().maxCoeff(), 2.0);
  }
}

TEST(Verify, UnbiasednessHoldsExactly) {
  const auto toy = affine_toy();
  const auto pts = random_box_points(3, 1.0, 2, 5);
  const EpochSnapshot s = take_snapshot(*toy.problem, pts[0]);
  for (std::size_t b : {1u, 2u}) {
    const CheckReport r = check_unbiasedness(*toy.problem, s, pts[1], b);
    EXPECT_TRUE(r.pass) << r.measured;
    EXPECT_EQ(r.trials, b == 1 ? 4u : 16u);
  }
  EXPECT_THROW(check_unbiasedness(*toy.problem, s, pts[1], 3), ConfigError);
}

TEST(Verify, VarianceChecksPassOnAffineToy) {
  const auto toy = affine_toy(2);
  const auto pts = random_box_points(3, 1.0, 2, 7);
  const EpochSnapshot s = take_snapshot(*toy.problem, pts[0]);
  const auto l1 = check_inner_variance(*toy.problem, s, pts[1], 2, 2, 20000, 3);
  EXPECT_TRUE(l1.pass) << l1.measured << " vs " << l1.bound;
  ASSERT_EQ(l1.details.size(), 1u);
  const auto sc = check_inner_variance_scaling(*toy.problem, s, pts[1], 2, 2, 20000, 3);
  EXPECT_TRUE(sc.pass) << sc.measured;
  EXPECT_TRUE(check_reference_variance(toy, s, pts[1], 2, 20000, 3).pass);
  EXPECT_TRUE(check_reference_variance_full_batch(toy, s, pts[1]).pass);
  EXPECT_TRUE(check_estimator_variance(toy, s, pts[1], 2, 2, 20000, 3).pass);
  EXPECT_THROW(check_inner_variance(*toy.problem, s, pts[1], 2, 2, 100, 3), ConfigError);
}

TEST(Verify, VarianceVanishesAtReference) {
  const auto toy = affine_toy(3);
  const Vector xt = vec({0.2, 0.1, -0.3});
  const EpochSnapshot s = take_snapshot(*toy.problem, xt);
  const auto l1 = check_inner_variance(*toy.problem, s, xt, 1, 1, 10000, 1);
  EXPECT_LE(l1.measured, 1e-20);
  EXPECT_TRUE(l1.pass);
}

TEST(Verify, ContractionFixturesMeetHypotheses) {
  for (const auto& f : contraction_fixtures()) {
    EXPECT_EQ(contraction_hypotheses_violation(*f.instance.problem, f.config, f.beta), "");
  }
}

TEST(Verify, DeterministicContractionHalvesPotential) {
  const auto f = contraction_fixtures().front();
  const CheckReport r = check_epoch_contraction(f.instance, f.config, {1}, f.x0, f.beta);
  EXPECT_FALSE(r.skipped);
  EXPECT_TRUE(r.pass) << r.measured;
  EXPECT_EQ(r.details.size(), f.config.epochs);
}

TEST(Verify, ViolatedHypothesesAreSkipped) {
  auto f = contraction_fixtures().back();
  f.config.a = 1;
  const CheckReport r = check_epoch_contraction(f.instance, f.config, {1}, f.x0, f.beta);
  EXPECT_TRUE(r.skipped);
  EXPECT_NE(r.note.find("a < "), std::string::npos);
}

TEST(Verify, PotentialStartsFromInitialPoint) {
  const auto f = contraction_fixtures().front();
  RunConfig cfg = f.config;
  const RunResult run = run_scvrg(*f.instance.problem, cfg, f.x0);
  const auto E = epoch_potentials(f.instance, cfg, run, f.x0, f.beta);
  ASSERT_EQ(E.size(), cfg.epochs + 1);
  for (double e : E) EXPECT_GE(e, 0.0);
}

TEST(Verify, SuiteReportsDistinctNamedChecks) {
  SuiteOptions opt;
  opt.trials = 10000;
  opt.contraction_seeds = 3;
  const auto reports = run_check_suite(opt);
  std::set<std::string> names;
  for (const auto& r : reports) {
    names.insert(r.name);
    EXPECT_TRUE(r.pass) << r.name << " measured " << r.measured << " bound " << r.bound;
  }
  EXPECT_EQ(names.size(), reports.size());
  std::ostringstream csv;
  write_check_csv(csv, reports);
  EXPECT_EQ(csv.str().rfind("name,pass,measured,bound,trials,seed\n", 0), 0u);
}

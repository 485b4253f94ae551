#include "compopt/prox.hpp"
#include "compopt/rng.hpp"
#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace compopt;
using compopt::testing::vec;

namespace {

/// Minimises lambda|y| + (y - x)^2 / (2 eta) over [-R, R] by bisection on the
/// sign of the subdifferential.
double numeric_prox(double lambda, double radius, double x, double eta) {
  auto lower = [&](double y) { return (y - x) / eta + (y > 0.0 ? lambda : -lambda); };
  auto upper = [&](double y) { return (y - x) / eta + (y >= 0.0 ? lambda : -lambda); };
  double lo = -radius, hi = radius;
  if (lower(lo) >= 0.0) return lo;
  if (upper(hi) <= 0.0) return hi;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (upper(mid) < 0.0) {
      lo = mid;
    } else if (lower(mid) > 0.0) {
      hi = mid;
    } else {
      return mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(Prox, ZeroLambdaIsProjection) {
  const Vector out = prox_step(Regularizer{0.0, 1.0}, vec({2.0, -0.5}), 1.0);
  EXPECT_EQ(out, vec({1.0, -0.5}));
}

TEST(Prox, SoftThresholdMatchesNumericMinimiser) {
  const double oracle = numeric_prox(0.5, 10.0, 2.0, 1.0);
  EXPECT_NEAR(oracle, 1.5, 1e-8);
  EXPECT_NEAR(prox_step(Regularizer{0.5, 10.0}, vec({2.0}), 1.0)[0], oracle, 1e-8);
}

TEST(Prox, ZeroIsFixed) {
  for (double lambda : {0.0, 0.3, 5.0}) {
    EXPECT_EQ(prox_step(Regularizer{lambda, 2.0}, vec({0.0}), 0.7)[0], 0.0);
  }
}

TEST(Prox, RejectsNonPositiveStep) {
  EXPECT_THROW(prox_step(Regularizer{}, vec({1.0}), 0.0), ConfigError);
  EXPECT_THROW(prox_step(Regularizer{}, vec({1.0}), -1.0), ConfigError);
}

TEST(Prox, RegularizerValidation) {
  EXPECT_THROW((Regularizer{-1.0, 1.0}).validate(), ConfigError);
  EXPECT_THROW((Regularizer{0.0, 0.0}).validate(), ConfigError);
  EXPECT_NO_THROW((Regularizer{0.0, 1.0}).validate());
}

TEST(Prox, RegValue) {
  EXPECT_DOUBLE_EQ(reg_value(Regularizer{1.0, 5.0}, vec({1.0, -2.0})), 3.0);
  EXPECT_DOUBLE_EQ(reg_value(Regularizer{0.0, 5.0}, vec({1.0, -2.0})), 0.0);
  EXPECT_THROW(reg_value(Regularizer{1.0, 5.0}, vec({6.0, 0.0})), InfeasibleError);
}

TEST(Prox, MatchesNumericMinimisationOnRandomInputs) {
  const CounterRng rng(42);
  double worst = 0.0;
  for (std::uint64_t t = 0; t < 1000; ++t) {
    const double lambda = 2.0 * rng.uniform(0, t, Stream::check, 0);
    const double radius = 0.1 + 3.0 * rng.uniform(0, t, Stream::check, 1);
    const double eta = 0.01 + 2.0 * rng.uniform(0, t, Stream::check, 2);
    const double x = 8.0 * (rng.uniform(0, t, Stream::check, 3) - 0.5);
    const double got = prox_step(Regularizer{lambda, radius}, vec({x}), eta)[0];
    worst = std::max(worst, std::abs(got - numeric_prox(lambda, radius, x, eta)));
  }
  EXPECT_LE(worst, 1e-8);
}

TEST(Prox, NonexpansiveAndFeasible) {
  const CounterRng rng(7);
  const Regularizer reg{0.4, 1.5};
  for (std::uint64_t t = 0; t < 1000; ++t) {
    Vector x(4), y(4);
    for (int c = 0; c < 4; ++c) {
      x[c] = 6.0 * (rng.uniform(1, t, Stream::check, c) - 0.5);
      y[c] = 6.0 * (rng.uniform(2, t, Stream::check, c) - 0.5);
    }
    const Vector px = prox_step(reg, x, 0.8);
    const Vector py = prox_step(reg, y, 0.8);
    EXPECT_LE((px - py).norm(), (x - y).norm() + 1e-15);
    EXPECT_TRUE(reg.contains(px));
  }
}

TEST(Prox, HugeBoxIsPlainSoftThreshold) {
  const Vector out = prox_step(Regularizer{1.0, 1e12}, vec({3.0, -0.5, -4.0}), 0.5);
  EXPECT_EQ(out, vec({2.5, 0.0, -3.5}));
}

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>

using namespace compopt;
using compopt::testing::vec;

namespace {

ReturnsDataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_returns_csv(in, "test.csv");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

/// Mean-variance objective from its textbook form: -mean(r.x) + var(r.x).
double spmo_direct(const RowMatrix& r, const Vector& x) {
  const Eigen::Index N = r.rows();
  Vector p(N);
  for (Eigen::Index i = 0; i < N; ++i) p[i] = r.row(i).dot(x);
  const double mean = p.mean();
  double var = 0.0;
  for (Eigen::Index i = 0; i < N; ++i) var += (p[i] - mean) * (p[i] - mean);
  return -mean + var / static_cast<double>(N);
}

/// Gaussian elimination with partial pivoting.
Vector gauss_solve(Matrix A, Vector b) {
  const Eigen::Index n = A.rows();
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index piv = c;
    for (Eigen::Index r = c + 1; r < n; ++r) {
      if (std::abs(A(r, c)) > std::abs(A(piv, c))) piv = r;
    }
    A.row(c).swap(A.row(piv));
    std::swap(b[c], b[piv]);
    for (Eigen::Index r = c + 1; r < n; ++r) {
      const double f = A(r, c) / A(c, c);
      A.row(r) -= f * A.row(c);
      b[r] -= f * b[c];
    }
  }
  Vector x(n);
  for (Eigen::Index r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (Eigen::Index c = r + 1; c < n; ++c) s -= A(r, c) * x[c];
    x[r] = s / A(r, r);
  }
  return x;
}

}  // namespace

TEST(ReturnsCsv, DropsSentinelRowsAndScales) {
  const auto ds = parse(
      "date,A,B\n"
      "200001,1.5,-2.0\n"
      "200002,-99.99,3.0\n"
      "200003,0.0,0.0\n"
      "200004,4.0,-999\n"
      "200005,2.5,1.0\n");
  ASSERT_EQ(ds.periods(), 3u);
  EXPECT_EQ(ds.assets(), 2u);
  EXPECT_DOUBLE_EQ(ds.returns(0, 0), 0.015);
  EXPECT_DOUBLE_EQ(ds.returns(0, 1), -0.02);
  EXPECT_EQ(ds.returns(1, 0), 0.0);
  EXPECT_EQ(ds.dates[2], "200005");
  EXPECT_EQ(ds.labels, (std::vector<std::string>{"A", "B"}));
}

TEST(ReturnsCsv, SentinelFilteringLeavesTwoPeriods) {
  const auto ds = parse("date,A\n1,1.0\n2,-99.99\n3,2.0\n");
  EXPECT_EQ(ds.periods(), 2u);
}

TEST(ReturnsCsv, ErrorsNameTheLine) {
  EXPECT_NE(error_of("date,A,B\n1,1.0,2.0\n2,1.0\n").find("test.csv:3:"), std::string::npos);
  EXPECT_NE(error_of("date,A\n1,1.0\n2,abc\n3,1.0\n").find("test.csv:3:"), std::string::npos);
  EXPECT_FALSE(error_of("").empty());
  EXPECT_FALSE(error_of("date,A\n1,-99.99\n2,1.0\n").empty());
  EXPECT_FALSE(error_of("date,A\n1,1.0\n2,nan\n").empty());
}

TEST(ReturnsCsv, RoundTripLargeFile) {
  const auto ds = synthetic_returns(13781, 100, 3);
  const auto path = std::filesystem::temp_directory_path() / "compopt_roundtrip.csv";
  write_returns_csv(path.string(), ds);
  const auto back = load_returns_csv(path.string());
  std::filesystem::remove(path);
  ASSERT_EQ(back.periods(), 13781u);
  ASSERT_EQ(back.assets(), 100u);
  EXPECT_LE((back.returns - ds.returns).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ReturnsCsv, MissingFileIsInputError) {
  EXPECT_THROW(load_returns_csv("/nonexistent/returns.csv"), InputError);
}

TEST(MeanVariance, SinglePeriodIsLinear) {
  ReturnsDataset ds;
  ds.returns = RowMatrix(1, 3);
  ds.returns << 0.1, -0.2, 0.3;
  const auto p = build_mean_variance(ds, 0.0, 1.0);
  const Vector x = vec({0.5, 0.2, -0.4});
  EXPECT_NEAR(smooth_value(*p, x), -ds.returns.row(0).dot(x), 1e-15);
}

TEST(MeanVariance, MatchesDirectFormula) {
  const auto ds = synthetic_returns(60, 6, 8);
  const auto p = build_mean_variance(ds, 0.0, 1.0);
  const auto pts = random_box_points(6, 1.0, 20, 4);
  double worst = 0.0;
  for (const auto& x : pts) {
    worst = std::max(worst, std::abs(smooth_value(*p, x) - spmo_direct(ds.returns, x)));
  }
  EXPECT_LE(worst, 1e-10);
}

TEST(MeanVariance, SyntheticIsDeterministic) {
  EXPECT_EQ(synthetic_returns(50, 4, 2).returns, synthetic_returns(50, 4, 2).returns);
  EXPECT_NE(synthetic_returns(50, 4, 2).returns, synthetic_returns(50, 4, 3).returns);
}

TEST(Bellman, ZeroDiscountSolutionIsMeanReward) {
  const auto spec = random_bellman_spec(5, 6, 0.0, 2);
  Vector rbar = Vector::Zero(5);
  for (const auto& r : spec.rewards) rbar += r / 6.0;
  EXPECT_LE((bellman_solution(spec) - rbar).norm(), 1e-14);
}

TEST(Bellman, SingleSampleMatchesGaussianElimination) {
  const auto spec = random_bellman_spec(6, 1, 0.9, 5);
  const Matrix M = Matrix::Identity(6, 6) - 0.9 * spec.transitions[0];
  const Vector oracle = gauss_solve(M, spec.rewards[0]);
  EXPECT_LE((bellman_solution(spec) - oracle).cwiseAbs().maxCoeff(), 1e-10);
  const auto inst = build_bellman(spec);
  ASSERT_TRUE(inst.has_optimum());
  EXPECT_NEAR(*inst.phi_star, 0.0, 1e-20);
}

TEST(Bellman, OptimumIsStationary) {
  const auto inst = build_bellman(random_bellman_spec(10, 20, 0.9, 1));
  ASSERT_TRUE(inst.has_optimum());
  EXPECT_LE(full_gradient(*inst.problem, *inst.x_star).norm(), 1e-12);
  const auto dims = inst.problem->dims();
  EXPECT_EQ(dims.m, 20u);
  EXPECT_EQ(dims.n, 1u);
  EXPECT_EQ(dims.d, 10u);
}

TEST(Bellman, RejectsMalformedSpec) {
  auto spec = random_bellman_spec(3, 2, 0.9, 1);
  spec.transitions[1].row(0) *= 0.9;
  EXPECT_THROW(spec.validate(), InputError);
  EXPECT_THROW(build_bellman(spec), InputError);
  auto neg = random_bellman_spec(3, 2, 0.9, 1);
  neg.gamma = 1.0;
  EXPECT_THROW(neg.validate(), InputError);
}

TEST(Bellman, NoCertifiedOptimumWithPenalty) {
  const auto inst = build_bellman(random_bellman_spec(4, 3, 0.5, 1), Regularizer{0.1, 100.0});
  EXPECT_FALSE(inst.has_optimum());
}

TEST(Toys, IdentityOptimumIsStationary) {
  ToyOptions t;
  t.lambda = 0.0;
  t.radius = 5.0;
  const auto inst = build_toy(t);
  EXPECT_LE(full_gradient(*inst.problem, *inst.x_star).norm(), 1e-12);
  EXPECT_NEAR(objective(*inst.problem, *inst.x_star), *inst.phi_star, 1e-14);
}

TEST(Toys, CertifiedOptimaBeatRandomPoints) {
  for (ToyKind kind : {ToyKind::identity_quadratic, ToyKind::affine_quadratic, ToyKind::convex_sum}) {
    ToyOptions t;
    t.kind = kind;
    t.lambda = kind == ToyKind::affine_quadratic ? 0.0 : 0.1;
    t.seed = 6;
    const auto inst = build_toy(t);
    EXPECT_NEAR(objective(*inst.problem, *inst.x_star), *inst.phi_star, 1e-13);
    for (const auto& x : random_box_points(3, 1.0, 2000, 1)) {
      EXPECT_GE(objective(*inst.problem, x), *inst.phi_star - 1e-13);
    }
  }
}

TEST(Toys, AffineRejectsPenalty) {
  ToyOptions t;
  t.kind = ToyKind::affine_quadratic;
  t.lambda = 0.1;
  EXPECT_THROW(build_toy(t), InputError);
}

TEST(Toys, ConvexSumIsConvexWithNonconvexComponent) {
  ToyOptions t;
  t.kind = ToyKind::convex_sum;
  t.seed = 3;
  const auto inst = build_toy(t);
  const auto& p = *inst.problem;
  const auto total = [&](const Vector& x) { return smooth_value(p, x); };
  EXPECT_EQ(midpoint_convexity_violations(total, 3, 1.0, 10000, 1, 1e-12), 0u);

  const auto& cs = dynamic_cast<const detail::ConvexSum&>(p);
  std::size_t worst = 0;
  for (std::size_t i = 0; i < p.dims().n; ++i) {
    const auto fi = [&](const Vector& x) { return cs.component(i, x); };
    worst = std::max(worst, midpoint_convexity_violations(fi, 3, 1.0, 10000, 1, 1e-12));
  }
  EXPECT_GT(worst, 0u);
}

TEST(Toys, FingerprintsDistinguishProblems) {
  ToyOptions a, b;
  b.seed = 2;
  EXPECT_NE(build_toy(a).problem->fingerprint(), build_toy(b).problem->fingerprint());
  EXPECT_EQ(build_toy(a).problem->fingerprint(), build_toy(a).problem->fingerprint());
}

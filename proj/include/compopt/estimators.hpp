#pragma once

#include "compopt/accounting.hpp"
#include "compopt/problem.hpp"
#include "compopt/rng.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace compopt {

/// Full-batch quantities at the reference point x̃ of an epoch.
struct EpochSnapshot {
  Vector x_tilde;
  Vector g_tilde;  ///< g(x̃)
  Matrix z_tilde;  ///< dg(x̃)
  Vector v_tilde;  ///< grad F(x̃)
};

/// Index draws for one iteration; both lists are sampled with replacement.
struct MiniBatchDraw {
  std::vector<std::size_t> inner;  ///< A, indices into [m]
  std::vector<std::size_t> outer;  ///< B, indices into [n]
};

enum class BatchMode {
  with_replacement,  ///< uniform draws with replacement
  full_batch,        ///< A = [m], B = [n], each index once (deterministic)
};

/// Draws A and B for (epoch, iteration) from the keyed generator.
inline MiniBatchDraw draw_minibatch(const CounterRng& rng, std::uint64_t epoch,
                                    std::uint64_t iteration, const ProblemDims& dims,
                                    std::size_t a, std::size_t b,
                                    BatchMode mode = BatchMode::with_replacement) {
  MiniBatchDraw draw;
  draw.inner.resize(a);
  draw.outer.resize(b);
  if (mode == BatchMode::full_batch) {
    if (a != dims.m || b != dims.n) throw ConfigError("full-batch mode requires a = m and b = n");
    for (std::size_t j = 0; j < a; ++j) draw.inner[j] = j;
    for (std::size_t i = 0; i < b; ++i) draw.outer[i] = i;
    return draw;
  }
  for (std::size_t s = 0; s < a; ++s) {
    draw.inner[s] = rng.below(dims.m, epoch, iteration, Stream::inner, s);
  }
  for (std::size_t s = 0; s < b; ++s) {
    draw.outer[s] = rng.below(dims.n, epoch, iteration, Stream::outer, s);
  }
  return draw;
}

namespace detail {

inline void check_indices(std::span<const std::size_t> idx, std::size_t bound, const char* what) {
  if (idx.empty()) throw ConfigError(std::string(what) + " minibatch must be nonempty");
  for (std::size_t v : idx) {
    if (v >= bound) throw ConfigError(std::string(what) + " index out of range");
  }
}

}  // namespace detail

/// Computes g̃, z̃, ṽ at x̃ and charges m + n samples.
inline EpochSnapshot take_snapshot(const CompositionProblem& problem,
                                   const ConstVectorRef& x_tilde, SampleCounter& counter) {
  InnerMean g = inner_mean(problem, x_tilde);
  Vector v = g.jacobian.transpose() * outer_mean_gradient(problem, g.value);
  counter.charge(problem.dims().m + problem.dims().n);
  return EpochSnapshot{x_tilde, std::move(g.value), std::move(g.jacobian), std::move(v)};
}

inline EpochSnapshot take_snapshot(const CompositionProblem& problem,
                                   const ConstVectorRef& x_tilde) {
  SampleCounter scratch;
  return take_snapshot(problem, x_tilde, scratch);
}

/// Control-variate estimates of g(x) and dg(x).
struct InnerEstimate {
  Vector value;     ///< g_t
  Matrix jacobian;  ///< z_t
};

/// g_t = g̃ + (1/a) sum_{j in A} (g_j(x) - g_j(x̃)), and likewise z_t.
/// Charges one inner sample per entry of A.
inline InnerEstimate estimate_inner(const CompositionProblem& problem,
                                    const EpochSnapshot& snapshot, const ConstVectorRef& x,
                                    std::span<const std::size_t> A, SampleCounter& counter) {
  const auto& dims = problem.dims();
  detail::check_point(problem, x);
  detail::check_indices(A, dims.m, "inner");
  Vector dv = Vector::Zero(dims.k);
  Matrix dz = Matrix::Zero(dims.k, dims.d);
  Vector gx(dims.k), gt(dims.k);
  Matrix jx(dims.k, dims.d), jt(dims.k, dims.d);
  for (std::size_t j : A) {
    problem.inner(j, x, gx, jx);
    problem.inner(j, snapshot.x_tilde, gt, jt);
    dv += gx - gt;
    dz += jx - jt;
  }
  counter.charge(A.size());
  const double a = static_cast<double>(A.size());
  return InnerEstimate{snapshot.g_tilde + dv / a, snapshot.z_tilde + dz / a};
}

/// v_t = ṽ + (1/b) sum_{i in B} (z_t^T grad f_i(g_t) - z̃^T grad f_i(g̃)), built
/// on estimate_inner. Charges |A| + |B| samples.
inline Vector estimate_gradient(const CompositionProblem& problem, const EpochSnapshot& snapshot,
                                const ConstVectorRef& x, std::span<const std::size_t> A,
                                std::span<const std::size_t> B, SampleCounter& counter) {
  const auto& dims = problem.dims();
  detail::check_indices(B, dims.n, "outer");
  const InnerEstimate est = estimate_inner(problem, snapshot, x, A, counter);
  Vector acc = Vector::Zero(dims.d);
  Vector grad_t(dims.k), grad_tilde(dims.k);
  for (std::size_t i : B) {
    problem.outer(i, est.value, grad_t);
    problem.outer(i, snapshot.g_tilde, grad_tilde);
    acc += est.jacobian.transpose() * grad_t - snapshot.z_tilde.transpose() * grad_tilde;
  }
  counter.charge(B.size());
  return snapshot.v_tilde + acc / static_cast<double>(B.size());
}

inline Vector estimate_gradient(const CompositionProblem& problem, const EpochSnapshot& snapshot,
                                const ConstVectorRef& x, const MiniBatchDraw& draw,
                                SampleCounter& counter) {
  return estimate_gradient(problem, snapshot, x, draw.inner, draw.outer, counter);
}

/// Reference estimator using the exact g(x), dg(x):
/// u_t = ṽ + (1/b) sum_{i in B} ([dg(x)]^T grad f_i(g(x)) - z̃^T grad f_i(g̃)).
/// Unbiased for grad F(x) over uniform B; an analysis tool, so nothing is charged.
inline Vector unbiased_reference_gradient(const CompositionProblem& problem,
                                          const EpochSnapshot& snapshot, const InnerMean& exact,
                                          std::span<const std::size_t> B) {
  const auto& dims = problem.dims();
  detail::check_indices(B, dims.n, "outer");
  Vector acc = Vector::Zero(dims.d);
  Vector grad_x(dims.k), grad_tilde(dims.k);
  for (std::size_t i : B) {
    problem.outer(i, exact.value, grad_x);
    problem.outer(i, snapshot.g_tilde, grad_tilde);
    acc += exact.jacobian.transpose() * grad_x - snapshot.z_tilde.transpose() * grad_tilde;
  }
  return snapshot.v_tilde + acc / static_cast<double>(B.size());
}

inline Vector unbiased_reference_gradient(const CompositionProblem& problem,
                                          const EpochSnapshot& snapshot, const ConstVectorRef& x,
                                          std::span<const std::size_t> B) {
  detail::check_point(problem, x);
  return unbiased_reference_gradient(problem, snapshot, inner_mean(problem, x), B);
}

}  // namespace compopt

#pragma once

#include "compopt/prox.hpp"
#include "compopt/rng.hpp"
#include "compopt/types.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>

namespace compopt {

/// m inner maps g_j : R^d -> R^k, n outer functions f_i : R^k -> R.
struct ProblemDims {
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t k = 0;

  void validate() const {
    if (m == 0 || n == 0 || d == 0 || k == 0) {
      throw InputError("problem dimensions m, n, d, k must all be positive");
    }
  }

  /// Normaliser for "samples / N" axes.
  std::size_t normalizer() const { return std::max(m, n); }
};

/// Lipschitz constants of f_i, grad f_i, g_j, dg_j and the derived gradient
/// Lipschitz constant of F, ell = L_f * ell_g + L_g^2 * ell_f.
struct SmoothnessConstants {
  double L_f = 0.0;
  double ell_f = 0.0;
  double L_g = 0.0;
  double ell_g = 0.0;
  double ell = 0.0;

  static SmoothnessConstants make(double L_f, double ell_f, double L_g, double ell_g) {
    SmoothnessConstants c{L_f, ell_f, L_g, ell_g, L_f * ell_g + L_g * L_g * ell_f};
    if (!c.valid()) throw NumericalError("smoothness constants are unbounded or negative");
    return c;
  }

  bool valid() const {
    auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
    return ok(L_f) && ok(ell_f) && ok(L_g) && ok(ell_g) && ok(ell);
  }
};

/// Oracle bundle for min_x (1/n) sum_i f_i((1/m) sum_j g_j(x)) + r(x).
///
/// Oracles are pure and read-only after construction: the same (index, point)
/// always produces bit-identical output, and concurrent calls are safe.
class CompositionProblem {
 public:
  CompositionProblem(ProblemDims dims, Regularizer reg) : dims_(dims), reg_(reg) {
    dims_.validate();
    reg_.validate();
  }
  virtual ~CompositionProblem() = default;

  const ProblemDims& dims() const { return dims_; }
  const Regularizer& regularizer() const { return reg_; }

  /// g_j(x) into `value` (length k) and dg_j(x) into `jacobian` (k x d).
  virtual void inner(std::size_t j, const ConstVectorRef& x, VectorRef value,
                     MatrixRef jacobian) const = 0;

  virtual void inner_value(std::size_t j, const ConstVectorRef& x, VectorRef value) const {
    Matrix scratch(dims_.k, dims_.d);
    inner(j, x, value, scratch);
  }

  /// f_i(y); writes grad f_i(y) into `gradient` (length k).
  virtual double outer(std::size_t i, const ConstVectorRef& y, VectorRef gradient) const = 0;

  virtual double outer_value(std::size_t i, const ConstVectorRef& y) const {
    Vector scratch(dims_.k);
    return outer(i, y, scratch);
  }

  /// Closed-form constants on the box of the given radius, when known.
  virtual std::optional<SmoothnessConstants> closed_form_smoothness(double /*radius*/) const {
    return std::nullopt;
  }

  /// Content hash of the data defining the problem (used for caching Φ*).
  virtual std::uint64_t fingerprint() const = 0;

  virtual std::string name() const = 0;

 protected:
  ProblemDims dims_;
  Regularizer reg_;
};

/// Problem assembled from callables; handy for fixtures and ad-hoc tests.
class LambdaProblem final : public CompositionProblem {
 public:
  using InnerFn = std::function<void(std::size_t, const ConstVectorRef&, VectorRef, MatrixRef)>;
  using OuterFn = std::function<double(std::size_t, const ConstVectorRef&, VectorRef)>;

  LambdaProblem(ProblemDims dims, Regularizer reg, InnerFn inner, OuterFn outer,
                std::string name = "lambda",
                std::optional<SmoothnessConstants> constants = std::nullopt)
      : CompositionProblem(dims, reg),
        inner_(std::move(inner)),
        outer_(std::move(outer)),
        name_(std::move(name)),
        constants_(constants) {}

  void inner(std::size_t j, const ConstVectorRef& x, VectorRef value,
             MatrixRef jacobian) const override {
    inner_(j, x, value, jacobian);
  }
  double outer(std::size_t i, const ConstVectorRef& y, VectorRef gradient) const override {
    return outer_(i, y, gradient);
  }
  std::optional<SmoothnessConstants> closed_form_smoothness(double) const override {
    return constants_;
  }
  std::uint64_t fingerprint() const override {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : name_) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
    return h;
  }
  std::string name() const override { return name_; }

 private:
  InnerFn inner_;
  OuterFn outer_;
  std::string name_;
  std::optional<SmoothnessConstants> constants_;
};

namespace detail {

inline void check_point(const CompositionProblem& problem, const ConstVectorRef& x) {
  if (static_cast<std::size_t>(x.size()) != problem.dims().d) {
    throw InputError("point has dimension " + std::to_string(x.size()) + ", expected " +
                     std::to_string(problem.dims().d));
  }
  if (!x.allFinite()) throw InputError("point has non-finite entries");
}

}  // namespace detail

/// Full-batch inner quantities g(x) and dg(x).
struct InnerMean {
  Vector value;
  Matrix jacobian;
};

/// g(x) = (1/m) sum_j g_j(x) and its Jacobian, summed in ascending j.
inline InnerMean inner_mean(const CompositionProblem& problem, const ConstVectorRef& x) {
  detail::check_point(problem, x);
  const auto& dims = problem.dims();
  InnerMean out{Vector::Zero(dims.k), Matrix::Zero(dims.k, dims.d)};
  Vector value(dims.k);
  Matrix jac(dims.k, dims.d);
  for (std::size_t j = 0; j < dims.m; ++j) {
    problem.inner(j, x, value, jac);
    out.value += value;
    out.jacobian += jac;
  }
  out.value /= static_cast<double>(dims.m);
  out.jacobian /= static_cast<double>(dims.m);
  return out;
}

/// g(x) only.
inline Vector inner_mean_value(const CompositionProblem& problem, const ConstVectorRef& x) {
  detail::check_point(problem, x);
  const auto& dims = problem.dims();
  Vector sum = Vector::Zero(dims.k);
  Vector value(dims.k);
  for (std::size_t j = 0; j < dims.m; ++j) {
    problem.inner_value(j, x, value);
    sum += value;
  }
  return sum / static_cast<double>(dims.m);
}

/// (1/n) sum_i grad f_i(y), ascending i.
inline Vector outer_mean_gradient(const CompositionProblem& problem, const ConstVectorRef& y) {
  const auto& dims = problem.dims();
  Vector sum = Vector::Zero(dims.k);
  Vector grad(dims.k);
  for (std::size_t i = 0; i < dims.n; ++i) {
    problem.outer(i, y, grad);
    sum += grad;
  }
  return sum / static_cast<double>(dims.n);
}

/// F(x) without the regulariser or the box check; defined on all of R^d.
inline double smooth_value(const CompositionProblem& problem, const ConstVectorRef& x) {
  const Vector g = inner_mean_value(problem, x);
  double sum = 0.0;
  for (std::size_t i = 0; i < problem.dims().n; ++i) sum += problem.outer_value(i, g);
  return sum / static_cast<double>(problem.dims().n);
}

/// grad F(x) = [dg(x)]^T (1/n) sum_i grad f_i(g(x)).
inline Vector full_gradient(const CompositionProblem& problem, const ConstVectorRef& x) {
  const InnerMean g = inner_mean(problem, x);
  return g.jacobian.transpose() * outer_mean_gradient(problem, g.value);
}

/// Φ(x) = F(x) + r(x). Throws InfeasibleError outside the box.
inline double objective(const CompositionProblem& problem, const ConstVectorRef& x) {
  detail::check_point(problem, x);
  const double r = reg_value(problem.regularizer(), x);
  return smooth_value(problem, x) + r;
}

inline double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  if (a.rows() == 1 || a.cols() == 1) return a.norm();
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()(0);
}

/// Raw empirical smoothness estimate: largest observed slopes over `pairs`
/// random point pairs in the box. An estimate, not a certificate.
inline SmoothnessConstants estimate_smoothness(const CompositionProblem& problem, double radius,
                                               std::size_t pairs = 10000,
                                               std::uint64_t seed = 0x5eed) {
  if (!(radius > 0.0)) throw ConfigError("estimate_smoothness: radius must be > 0");
  const auto& dims = problem.dims();
  const CounterRng rng(seed);
  Vector x(dims.d), y(dims.d);
  Vector gx(dims.k), gy(dims.k), fx(dims.k), fy(dims.k);
  Matrix jx(dims.k, dims.d), jy(dims.k, dims.d);
  double L_f = 0.0, ell_f = 0.0, L_g = 0.0, ell_g = 0.0;
  for (std::size_t p = 0; p < pairs; ++p) {
    for (std::size_t c = 0; c < dims.d; ++c) {
      x[c] = radius * (2.0 * rng.uniform(0, p, Stream::check, 2 * c) - 1.0);
      y[c] = radius * (2.0 * rng.uniform(0, p, Stream::check, 2 * c + 1) - 1.0);
    }
    const std::size_t j = rng.below(dims.m, 1, p, Stream::check, 0);
    const std::size_t i = rng.below(dims.n, 1, p, Stream::check, 1);
    problem.inner(j, x, gx, jx);
    problem.inner(j, y, gy, jy);
    const double dx = (x - y).norm();
    if (dx > 0.0) {
      L_g = std::max(L_g, (gx - gy).norm() / dx);
      ell_g = std::max(ell_g, spectral_norm(jx - jy) / dx);
    }
    const double vx = problem.outer(i, gx, fx);
    const double vy = problem.outer(i, gy, fy);
    L_f = std::max({L_f, fx.norm(), fy.norm()});
    const double du = (gx - gy).norm();
    if (du > 0.0) {
      L_f = std::max(L_f, std::abs(vx - vy) / du);
      ell_f = std::max(ell_f, (fx - fy).norm() / du);
    }
  }
  return SmoothnessConstants::make(L_f, ell_f, L_g, ell_g);
}

/// Inflation applied to empirical slope maxima before they are used as bounds.
inline constexpr double kEmpiricalInflation = 1.2;

/// Smoothness constants on the box of `radius`: closed form when the problem
/// provides one, otherwise the empirical estimate with each slope inflated.
inline SmoothnessConstants lipschitz_bounds(const CompositionProblem& problem, double radius) {
  if (auto closed = problem.closed_form_smoothness(radius)) {
    if (!closed->valid()) throw NumericalError("closed-form smoothness constants are invalid");
    return *closed;
  }
  const SmoothnessConstants raw = estimate_smoothness(problem, radius);
  return SmoothnessConstants::make(raw.L_f * kEmpiricalInflation, raw.ell_f * kEmpiricalInflation,
                                   raw.L_g * kEmpiricalInflation,
                                   raw.ell_g * kEmpiricalInflation);
}

inline SmoothnessConstants lipschitz_bounds(const CompositionProblem& problem) {
  return lipschitz_bounds(problem, problem.regularizer().radius);
}

}  // namespace compopt

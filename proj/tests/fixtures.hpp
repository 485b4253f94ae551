#pragma once

#include "compopt/compopt.hpp"

#include <memory>

namespace compopt::testing {

/// m = n = 1, d = k = 1: g(x) = scale * x, f(y) = y^2 (or y when linear).
inline std::shared_ptr<LambdaProblem> scalar_problem(double scale, bool linear_outer,
                                                     Regularizer reg = {0.0, 10.0}) {
  return std::make_shared<LambdaProblem>(
      ProblemDims{1, 1, 1, 1}, reg,
      [scale](std::size_t, const ConstVectorRef& x, VectorRef v, MatrixRef jac) {
        v[0] = scale * x[0];
        jac(0, 0) = scale;
      },
      [linear_outer](std::size_t, const ConstVectorRef& y, VectorRef g) {
        if (linear_outer) {
          g[0] = 1.0;
          return y[0];
        }
        g[0] = 2.0 * y[0];
        return y[0] * y[0];
      },
      "scalar");
}

/// Returns r_1 = (1), r_2 = (3) in fractions.
inline ReturnsDataset two_period_dataset() {
  ReturnsDataset ds;
  ds.returns.resize(2, 1);
  ds.returns << 1.0, 3.0;
  ds.labels = {"A"};
  ds.dates = {"1", "2"};
  return ds;
}

inline Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

}  // namespace compopt::testing

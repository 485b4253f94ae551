#pragma once

#include "compopt/types.hpp"

#include <algorithm>
#include <cmath>

namespace compopt {

/// r(x) = lambda * ||x||_1 restricted to the centered box [-radius, radius]^d.
struct Regularizer {
  double lambda = 0.0;
  double radius = 1.0;

  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      throw ConfigError("regularizer: lambda must be finite and >= 0");
    }
    if (!(radius > 0.0)) throw ConfigError("regularizer: box radius must be > 0");
  }

  bool contains(const ConstVectorRef& x) const {
    return x.allFinite() && (x.size() == 0 || x.cwiseAbs().maxCoeff() <= radius);
  }
};

/// Componentwise soft-threshold by eta*lambda followed by clamping to the box.
/// The objective is separable, so this is the exact prox over the box.
inline Vector prox_step(const Regularizer& reg, const ConstVectorRef& x, double eta) {
  if (!(eta > 0.0)) throw ConfigError("prox_step: eta must be > 0");
  const double tau = eta * reg.lambda;
  Vector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double shrunk = std::copysign(std::max(std::abs(x[i]) - tau, 0.0), x[i]);
    out[i] = std::clamp(shrunk, -reg.radius, reg.radius);
  }
  return out;
}

/// lambda * ||x||_1; throws InfeasibleError outside the box.
inline double reg_value(const Regularizer& reg, const ConstVectorRef& x) {
  if (!reg.contains(x)) throw InfeasibleError("point lies outside the feasible box");
  return reg.lambda * x.lpNorm<1>();
}

}  // namespace compopt

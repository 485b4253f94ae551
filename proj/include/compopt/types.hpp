#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace compopt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorRef = Eigen::Ref<Vector>;
using MatrixRef = Eigen::Ref<Matrix>;
using ConstVectorRef = Eigen::Ref<const Vector>;

/// Bad input at an API boundary: wrong dimensions, malformed files, bad flags.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inconsistent or unusable algorithm configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A point outside the feasible box was handed to something that needs Φ(x).
class InfeasibleError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numerical estimate came out unbounded or non-finite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline bool all_finite(const ConstVectorRef& x) { return x.allFinite(); }

}  // namespace compopt

#pragma once

#include "compopt/problem.hpp"
#include "compopt/prox.hpp"
#include "compopt/types.hpp"

#include <Eigen/LU>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace compopt {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

/// FNV-1a over raw bytes; stable content hash for caching.
class Fingerprint {
 public:
  void bytes(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) h_ = (h_ ^ p[i]) * 0x100000001b3ULL;
  }
  void number(double v) { bytes(&v, sizeof v); }
  void number(std::uint64_t v) { bytes(&v, sizeof v); }
  void text(std::string_view s) { bytes(s.data(), s.size()); }
  template <typename Derived>
  void matrix(const Eigen::DenseBase<Derived>& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) number(static_cast<double>(m(r, c)));
    }
  }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline bool is_sentinel(double percent) { return percent == -99.99 || percent == -999.0; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Returns data
// ---------------------------------------------------------------------------

/// N periods of returns on d assets, stored as fractions (not percent).
struct ReturnsDataset {
  RowMatrix returns;  ///< N x d; row i is r_i
  std::vector<std::string> labels;
  std::vector<std::string> dates;

  std::size_t periods() const { return static_cast<std::size_t>(returns.rows()); }
  std::size_t assets() const { return static_cast<std::size_t>(returns.cols()); }
};

/// Parses a returns CSV: header row (date column, then asset labels), then one
/// row per period with a date and d percentage returns. Rows holding a missing
/// value sentinel (-99.99 or -999) are dropped; values are divided by 100.
inline ReturnsDataset parse_returns_csv(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& why) -> InputError {
    return InputError(source + ":" + std::to_string(line_no) + ": " + why);
  };
  ReturnsDataset ds;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) break;
  }
  if (detail::trim(line).empty()) throw InputError(source + ": missing header row");
  const auto header = detail::split_commas(line);
  if (header.size() < 2) throw fail("header needs a date column and at least one asset");
  for (std::size_t c = 1; c < header.size(); ++c) ds.labels.emplace_back(header[c]);
  const std::size_t d = ds.labels.size();

  std::vector<double> values;
  std::vector<double> row(d);
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_commas(line);
    if (cells.size() != d + 1) {
      throw fail("expected " + std::to_string(d + 1) + " columns, found " +
                 std::to_string(cells.size()));
    }
    bool missing = false;
    for (std::size_t c = 0; c < d; ++c) {
      const auto v = detail::parse_double(cells[c + 1]);
      if (!v) throw fail("cannot parse value '" + std::string(cells[c + 1]) + "'");
      missing = missing || detail::is_sentinel(*v);
      row[c] = *v / 100.0;
    }
    if (missing) continue;
    ds.dates.emplace_back(cells[0]);
    values.insert(values.end(), row.begin(), row.end());
  }
  const std::size_t N = values.size() / d;
  if (N < 2) throw InputError(source + ": need at least 2 complete rows, found " + std::to_string(N));
  ds.returns = Eigen::Map<const RowMatrix>(values.data(), static_cast<Eigen::Index>(N),
                                           static_cast<Eigen::Index>(d));
  return ds;
}

inline ReturnsDataset load_returns_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open returns file '" + path + "'");
  return parse_returns_csv(in, path);
}

/// Writes the dataset back in the percent-unit CSV layout.
inline void write_returns_csv(std::ostream& out, const ReturnsDataset& ds) {
  out << "date";
  for (std::size_t c = 0; c < ds.assets(); ++c) {
    out << ',' << (c < ds.labels.size() ? ds.labels[c] : "A" + std::to_string(c + 1));
  }
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < ds.periods(); ++i) {
    out << (i < ds.dates.size() ? ds.dates[i] : std::to_string(i + 1));
    for (std::size_t c = 0; c < ds.assets(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.returns(i, c) * 100.0);
      out << ',' << buf;
    }
    out << '\n';
  }
}

inline void write_returns_csv(const std::string& path, const ReturnsDataset& ds) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write returns file '" + path + "'");
  write_returns_csv(out, ds);
}

/// One-factor synthetic monthly returns (fractions): r = alpha + beta * f + noise.
inline ReturnsDataset synthetic_returns(std::size_t periods, std::size_t assets,
                                        std::uint64_t seed) {
  if (periods == 0 || assets == 0) throw InputError("synthetic returns need N, d > 0");
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> market(0.008, 0.045);
  std::normal_distribution<double> noise(0.0, 0.03);
  std::normal_distribution<double> alpha_dist(0.0, 0.003);
  std::uniform_real_distribution<double> beta_dist(0.6, 1.4);
  Vector alpha(assets), beta(assets);
  for (std::size_t c = 0; c < assets; ++c) {
    alpha[c] = alpha_dist(gen);
    beta[c] = beta_dist(gen);
  }
  ReturnsDataset ds;
  ds.returns.resize(static_cast<Eigen::Index>(periods), static_cast<Eigen::Index>(assets));
  for (std::size_t i = 0; i < periods; ++i) {
    const double f = market(gen);
    for (std::size_t c = 0; c < assets; ++c) ds.returns(i, c) = alpha[c] + beta[c] * f + noise(gen);
    ds.dates.push_back(std::to_string(i + 1));
  }
  for (std::size_t c = 0; c < assets; ++c) ds.labels.push_back("A" + std::to_string(c + 1));
  return ds;
}

// ---------------------------------------------------------------------------
// Sparse mean-variance
// ---------------------------------------------------------------------------

/// min_x (1/N) sum_i (<r_i,x> - mean_j <r_j,x>)^2 - mean_j <r_j,x> + lambda ||x||_1
/// written as a composition with m = n = N, k = d + 1:
///   g_j(x) = (x, -<r_j, x>),  f_i(z, y) = (<r_i, z> + y)^2 - <r_i, z>.
class MeanVarianceProblem final : public CompositionProblem {
 public:
  MeanVarianceProblem(RowMatrix returns, Regularizer reg)
      : CompositionProblem(dims_for(returns), reg), r_(std::move(returns)) {
    mean_ = Vector::Zero(r_.cols());
    for (Eigen::Index i = 0; i < r_.rows(); ++i) mean_ += r_.row(i).transpose();
    mean_ /= static_cast<double>(r_.rows());
  }

  void inner(std::size_t j, const ConstVectorRef& x, VectorRef value,
             MatrixRef jacobian) const override {
    inner_value(j, x, value);
    const auto d = r_.cols();
    jacobian.topRows(d).setIdentity();
    jacobian.row(d) = -r_.row(static_cast<Eigen::Index>(j));
  }

  void inner_value(std::size_t j, const ConstVectorRef& x, VectorRef value) const override {
    const auto d = r_.cols();
    value.head(d) = x;
    value[d] = -r_.row(static_cast<Eigen::Index>(j)).dot(x);
  }

  double outer(std::size_t i, const ConstVectorRef& y, VectorRef gradient) const override {
    const auto d = r_.cols();
    const auto ri = r_.row(static_cast<Eigen::Index>(i));
    const double rz = ri.dot(y.head(d));
    const double s = rz + y[d];
    gradient.head(d) = (2.0 * s - 1.0) * ri.transpose();
    gradient[d] = 2.0 * s;
    return s * s - rz;
  }

  double outer_value(std::size_t i, const ConstVectorRef& y) const override {
    const auto d = r_.cols();
    const double rz = r_.row(static_cast<Eigen::Index>(i)).dot(y.head(d));
    const double s = rz + y[d];
    return s * s - rz;
  }

  /// ell_g = 0 (affine inner map); ell_f = 2 max_i(||r_i||^2 + 1);
  /// L_g = max_j sqrt(1 + ||r_j||^2); L_f = sup of ||grad f_i|| over the image
  /// of the box, where <r_i, z> + y = <r_i - r̄, x> ranges over ±radius·||r_i - r̄||_1.
  std::optional<SmoothnessConstants> closed_form_smoothness(double radius) const override {
    double L_f = 0.0, ell_f = 0.0, L_g = 0.0;
    for (Eigen::Index i = 0; i < r_.rows(); ++i) {
      const double sq = r_.row(i).squaredNorm();
      const double spread = radius * (r_.row(i).transpose() - mean_).lpNorm<1>();
      ell_f = std::max(ell_f, 2.0 * (sq + 1.0));
      L_g = std::max(L_g, std::sqrt(1.0 + sq));
      L_f = std::max(L_f, std::sqrt((2.0 * spread + 1.0) * (2.0 * spread + 1.0) * sq +
                                    4.0 * spread * spread));
    }
    return SmoothnessConstants::make(L_f, ell_f, L_g, 0.0);
  }

  std::uint64_t fingerprint() const override {
    detail::Fingerprint fp;
    fp.text("meanvar");
    fp.number(static_cast<std::uint64_t>(r_.rows()));
    fp.number(static_cast<std::uint64_t>(r_.cols()));
    fp.bytes(r_.data(), static_cast<std::size_t>(r_.size()) * sizeof(double));
    fp.number(reg_.lambda);
    fp.number(reg_.radius);
    return fp.value();
  }

  std::string name() const override { return "meanvar"; }

  const RowMatrix& returns() const { return r_; }
  const Vector& mean_return() const { return mean_; }

 private:
  static ProblemDims dims_for(const RowMatrix& r) {
    if (r.rows() == 0 || r.cols() == 0) throw InputError("mean-variance needs N, d > 0");
    const auto N = static_cast<std::size_t>(r.rows());
    const auto d = static_cast<std::size_t>(r.cols());
    return ProblemDims{N, N, d, d + 1};
  }

  RowMatrix r_;
  Vector mean_;
};

inline std::shared_ptr<const MeanVarianceProblem> build_mean_variance(const ReturnsDataset& ds,
                                                                      double lambda = 1e-2,
                                                                      double radius = 1.0) {
  return std::make_shared<const MeanVarianceProblem>(ds.returns, Regularizer{lambda, radius});
}

// ---------------------------------------------------------------------------
// Bellman residual (policy evaluation)
// ---------------------------------------------------------------------------

/// Sampled transition matrices P_j and rewards r_j of a fixed policy.
struct BellmanSpec {
  std::size_t states = 0;
  double gamma = 0.9;
  std::vector<Matrix> transitions;
  std::vector<Vector> rewards;

  std::size_t samples() const { return transitions.size(); }

  void validate() const {
    if (states == 0) throw InputError("bellman: state count must be positive");
    if (!(gamma > 0.0 && gamma < 1.0)) {
      // gamma = 0 is admitted as a degenerate identity system.
      if (gamma != 0.0) throw InputError("bellman: gamma must lie in (0, 1)");
    }
    if (transitions.empty() || transitions.size() != rewards.size()) {
      throw InputError("bellman: need the same positive number of transitions and rewards");
    }
    for (std::size_t j = 0; j < transitions.size(); ++j) {
      const Matrix& P = transitions[j];
      if (static_cast<std::size_t>(P.rows()) != states ||
          static_cast<std::size_t>(P.cols()) != states ||
          static_cast<std::size_t>(rewards[j].size()) != states) {
        throw InputError("bellman: sample " + std::to_string(j) + " has wrong dimensions");
      }
      if ((P.array() < 0.0).any()) {
        throw InputError("bellman: sample " + std::to_string(j) + " has negative probabilities");
      }
      for (Eigen::Index r = 0; r < P.rows(); ++r) {
        if (std::abs(P.row(r).sum() - 1.0) > 1e-12) {
          throw InputError("bellman: row " + std::to_string(r) + " of sample " +
                           std::to_string(j) + " does not sum to 1");
        }
      }
    }
  }
};

/// Random dense row-stochastic samples with uniform [0, 1) rewards.
inline BellmanSpec random_bellman_spec(std::size_t states, std::size_t samples, double gamma,
                                       std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  BellmanSpec spec{states, gamma, {}, {}};
  for (std::size_t j = 0; j < samples; ++j) {
    Matrix P(states, states);
    for (std::size_t r = 0; r < states; ++r) {
      for (std::size_t c = 0; c < states; ++c) P(r, c) = unit(gen);
      P.row(r) /= P.row(r).sum();
    }
    Vector rew(states);
    for (std::size_t s = 0; s < states; ++s) rew[s] = unit(gen);
    spec.transitions.push_back(std::move(P));
    spec.rewards.push_back(std::move(rew));
  }
  return spec;
}

/// g_j(x) = (I - gamma P_j) x - r_j, single outer f(y) = ½||y||².
class BellmanProblem final : public CompositionProblem {
 public:
  BellmanProblem(const BellmanSpec& spec, Regularizer reg)
      : CompositionProblem(dims_for(spec), reg), spec_(spec) {
    const auto S = static_cast<Eigen::Index>(spec.states);
    for (std::size_t j = 0; j < spec.samples(); ++j) {
      operators_.push_back(Matrix::Identity(S, S) - spec.gamma * spec.transitions[j]);
    }
  }

  void inner(std::size_t j, const ConstVectorRef& x, VectorRef value,
             MatrixRef jacobian) const override {
    inner_value(j, x, value);
    jacobian = operators_[j];
  }

  void inner_value(std::size_t j, const ConstVectorRef& x, VectorRef value) const override {
    value.noalias() = operators_[j] * x;
    value -= spec_.rewards[j];
  }

  double outer(std::size_t, const ConstVectorRef& y, VectorRef gradient) const override {
    gradient = y;
    return 0.5 * y.squaredNorm();
  }

  double outer_value(std::size_t, const ConstVectorRef& y) const override {
    return 0.5 * y.squaredNorm();
  }

  std::optional<SmoothnessConstants> closed_form_smoothness(double radius) const override {
    double L_g = 0.0, image = 0.0;
    const double box_norm = radius * std::sqrt(static_cast<double>(spec_.states));
    for (std::size_t j = 0; j < operators_.size(); ++j) {
      const double op = spectral_norm(operators_[j]);
      L_g = std::max(L_g, op);
      image = std::max(image, op * box_norm + spec_.rewards[j].norm());
    }
    return SmoothnessConstants::make(image, 1.0, L_g, 0.0);
  }

  std::uint64_t fingerprint() const override {
    detail::Fingerprint fp;
    fp.text("bellman");
    fp.number(spec_.gamma);
    for (std::size_t j = 0; j < spec_.samples(); ++j) {
      fp.matrix(spec_.transitions[j]);
      fp.matrix(spec_.rewards[j]);
    }
    fp.number(reg_.lambda);
    fp.number(reg_.radius);
    return fp.value();
  }

  std::string name() const override { return "bellman"; }

  const BellmanSpec& spec() const { return spec_; }

 private:
  static ProblemDims dims_for(const BellmanSpec& spec) {
    spec.validate();
    return ProblemDims{spec.samples(), 1, spec.states, spec.states};
  }

  BellmanSpec spec_;
  std::vector<Matrix> operators_;
};

/// Solution of the averaged Bellman system (I - gamma P̄) x = r̄.
inline Vector bellman_solution(const BellmanSpec& spec) {
  spec.validate();
  const auto S = static_cast<Eigen::Index>(spec.states);
  Matrix P = Matrix::Zero(S, S);
  Vector r = Vector::Zero(S);
  for (std::size_t j = 0; j < spec.samples(); ++j) {
    P += spec.transitions[j];
    r += spec.rewards[j];
  }
  P /= static_cast<double>(spec.samples());
  r /= static_cast<double>(spec.samples());
  const Matrix M = Matrix::Identity(S, S) - spec.gamma * P;
  Eigen::FullPivLU<Matrix> lu(M);
  if (!lu.isInvertible()) throw NumericalError("bellman: I - gamma P is singular");
  return lu.solve(r);
}

/// A problem together with its certified optimum, when one is known.
struct ProblemInstance {
  std::shared_ptr<const CompositionProblem> problem;
  std::optional<Vector> x_star;
  std::optional<double> phi_star;

  bool has_optimum() const { return x_star.has_value() && phi_star.has_value(); }
};

/// Builds the Bellman problem. With lambda = 0 and a box containing the linear
/// solve, that solve is the certified optimum.
inline ProblemInstance build_bellman(const BellmanSpec& spec, Regularizer reg = {0.0, 100.0}) {
  auto problem = std::make_shared<const BellmanProblem>(spec, reg);
  ProblemInstance inst{problem, std::nullopt, std::nullopt};
  const Vector x = bellman_solution(spec);
  if (reg.lambda == 0.0 && reg.contains(x)) {
    inst.x_star = x;
    inst.phi_star = objective(*problem, x);
  }
  return inst;
}

// ---------------------------------------------------------------------------
// Analytic fixtures
// ---------------------------------------------------------------------------

enum class ToyKind {
  identity_quadratic,  ///< g_j(x) = x, f_i(y) = (y - c_i)^T W_i (y - c_i)
  affine_quadratic,    ///< g_j(x) = A_j x + c_j, f_i(y) = ½ (y - e_i)^T H_i (y - e_i); lambda = 0
  convex_sum,          ///< nonlinear g_j averaging to x, some f_i nonconvex, F convex
};

struct ToyOptions {
  ToyKind kind = ToyKind::identity_quadratic;
  std::size_t m = 4;
  std::size_t n = 4;
  std::size_t d = 3;
  double lambda = 0.0;
  double radius = 1.0;
  std::uint64_t seed = 1;
  double center_scale = 0.5;   ///< identity: common center c uniform in ±scale
  double center_spread = 0.3;  ///< per-i deviation of c_i around c
  double weight_spread = 0.5;  ///< diagonal weights in 1 ± spread
};

namespace detail {

inline double soft_threshold(double v, double tau) {
  return std::copysign(std::max(std::abs(v) - tau, 0.0), v);
}

class IdentityQuadratic final : public CompositionProblem {
 public:
  IdentityQuadratic(std::size_t m, std::vector<Vector> centers, std::vector<Vector> weights,
                    Regularizer reg)
      : CompositionProblem(ProblemDims{m, centers.size(), static_cast<std::size_t>(centers[0].size()),
                                       static_cast<std::size_t>(centers[0].size())},
                           reg),
        c_(std::move(centers)),
        w_(std::move(weights)) {}

  void inner(std::size_t, const ConstVectorRef& x, VectorRef value,
             MatrixRef jacobian) const override {
    value = x;
    jacobian.setIdentity();
  }
  void inner_value(std::size_t, const ConstVectorRef& x, VectorRef value) const override {
    value = x;
  }
  double outer(std::size_t i, const ConstVectorRef& y, VectorRef gradient) const override {
    const Vector diff = y - c_[i];
    gradient = 2.0 * w_[i].cwiseProduct(diff);
    return diff.dot(w_[i].cwiseProduct(diff));
  }
  std::optional<SmoothnessConstants> closed_form_smoothness(double radius) const override {
    double L_f = 0.0, ell_f = 0.0;
    for (std::size_t i = 0; i < c_.size(); ++i) {
      ell_f = std::max(ell_f, 2.0 * w_[i].maxCoeff());
      L_f = std::max(L_f, (2.0 * w_[i].array() * (radius + c_[i].array().abs())).matrix().norm());
    }
    return SmoothnessConstants::make(L_f, ell_f, 1.0, 0.0);
  }
  std::uint64_t fingerprint() const override {
    Fingerprint fp;
    fp.text("toy-identity");
    fp.number(static_cast<std::uint64_t>(dims_.m));
    for (std::size_t i = 0; i < c_.size(); ++i) {
      fp.matrix(c_[i]);
      fp.matrix(w_[i]);
    }
    fp.number(reg_.lambda);
    fp.number(reg_.radius);
    return fp.value();
  }
  std::string name() const override { return "toy-identity"; }

 private:
  std::vector<Vector> c_;
  std::vector<Vector> w_;
};

class AffineQuadratic final : public CompositionProblem {
 public:
  AffineQuadratic(std::vector<Matrix> A, std::vector<Vector> c, std::vector<Vector> e,
                  std::vector<Vector> h, Regularizer reg)
      : CompositionProblem(ProblemDims{A.size(), e.size(), static_cast<std::size_t>(A[0].cols()),
                                       static_cast<std::size_t>(A[0].rows())},
                           reg),
        A_(std::move(A)),
        c_(std::move(c)),
        e_(std::move(e)),
        h_(std::move(h)) {}

  void inner(std::size_t j, const ConstVectorRef& x, VectorRef value,
             MatrixRef jacobian) const override {
    inner_value(j, x, value);
    jacobian = A_[j];
  }
  void inner_value(std::size_t j, const ConstVectorRef& x, VectorRef value) const override {
    value.noalias() = A_[j] * x;
    value += c_[j];
  }
  double outer(std::size_t i, const ConstVectorRef& y, VectorRef gradient) const override {
    const Vector diff = y - e_[i];
    gradient = h_[i].cwiseProduct(diff);
    return 0.5 * diff.dot(gradient);
  }
  std::optional<SmoothnessConstants> closed_form_smoothness(double radius) const override {
    double L_g = 0.0, image = 0.0, ell_f = 0.0, L_f = 0.0;
    const double box_norm = radius * std::sqrt(static_cast<double>(dims_.d));
    for (std::size_t j = 0; j < A_.size(); ++j) {
      const double op = spectral_norm(A_[j]);
      L_g = std::max(L_g, op);
      image = std::max(image, op * box_norm + c_[j].norm());
    }
    for (std::size_t i = 0; i < e_.size(); ++i) {
      const double hmax = h_[i].maxCoeff();
      ell_f = std::max(ell_f, hmax);
      L_f = std::max(L_f, hmax * (image + e_[i].norm()));
    }
    return SmoothnessConstants::make(L_f, ell_f, L_g, 0.0);
  }
  std::uint64_t fingerprint() const override {
    Fingerprint fp;
    fp.text("toy-affine");
    for (const auto& a : A_) fp.matrix(a);
    for (const auto& v : c_) fp.matrix(v);
    for (const auto& v : e_) fp.matrix(v);
    for (const auto& v : h_) fp.matrix(v);
    fp.number(reg_.lambda);
    fp.number(reg_.radius);
    return fp.value();
  }
  std::string name() const override { return "toy-affine"; }

 private:
  std::vector<Matrix> A_;
  std::vector<Vector> c_;
  std::vector<Vector> e_;
  std::vector<Vector> h_;
};

class ConvexSum final : public CompositionProblem {
 public:
  ConvexSum(std::vector<double> amplitudes, double omega, std::vector<Vector> curvature,
            std::vector<Vector> linear, Regularizer reg)
      : CompositionProblem(ProblemDims{amplitudes.size(), curvature.size(),
                                       static_cast<std::size_t>(curvature[0].size()),
                                       static_cast<std::size_t>(curvature[0].size())},
                           reg),
        alpha_(std::move(amplitudes)),
        omega_(omega),
        D_(std::move(curvature)),
        c_(std::move(linear)) {}

  void inner(std::size_t j, const ConstVectorRef& x, VectorRef value,
             MatrixRef jacobian) const override {
    inner_value(j, x, value);
    jacobian.setZero();
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      jacobian(k, k) = 1.0 + alpha_[j] * omega_ * std::cos(omega_ * x[k]);
    }
  }
  void inner_value(std::size_t j, const ConstVectorRef& x, VectorRef value) const override {
    for (Eigen::Index k = 0; k < x.size(); ++k) value[k] = x[k] + alpha_[j] * std::sin(omega_ * x[k]);
  }
  double outer(std::size_t i, const ConstVectorRef& y, VectorRef gradient) const override {
    gradient = D_[i].cwiseProduct(y) - c_[i];
    return 0.5 * y.dot(D_[i].cwiseProduct(y)) - c_[i].dot(y);
  }
  std::optional<SmoothnessConstants> closed_form_smoothness(double radius) const override {
    double amax = 0.0;
    for (double a : alpha_) amax = std::max(amax, std::abs(a));
    double ell_f = 0.0, L_f = 0.0;
    for (std::size_t i = 0; i < D_.size(); ++i) {
      const Eigen::ArrayXd absD = D_[i].array().abs();
      ell_f = std::max(ell_f, absD.maxCoeff());
      L_f = std::max(L_f, (absD * (radius + amax) + c_[i].array().abs()).matrix().norm());
    }
    return SmoothnessConstants::make(L_f, ell_f, 1.0 + amax * omega_, amax * omega_ * omega_);
  }
  std::uint64_t fingerprint() const override {
    Fingerprint fp;
    fp.text("toy-convex-sum");
    for (double a : alpha_) fp.number(a);
    fp.number(omega_);
    for (const auto& v : D_) fp.matrix(v);
    for (const auto& v : c_) fp.matrix(v);
    fp.number(reg_.lambda);
    fp.number(reg_.radius);
    return fp.value();
  }
  std::string name() const override { return "toy-convex-sum"; }

  /// f_i(x) along the exact mean inner map g(x) = x.
  double component(std::size_t i, const ConstVectorRef& x) const {
    return 0.5 * x.dot(D_[i].cwiseProduct(x)) - c_[i].dot(x);
  }

 private:
  std::vector<double> alpha_;
  double omega_;
  std::vector<Vector> D_;
  std::vector<Vector> c_;
};

inline Vector uniform_vector(std::mt19937_64& gen, std::size_t d, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(d);
  for (std::size_t i = 0; i < d; ++i) v[i] = u(gen);
  return v;
}

}  // namespace detail

/// Builds an analytic fixture together with its exact optimum.
inline ProblemInstance build_toy(const ToyOptions& opt) {
  if (opt.m == 0 || opt.n == 0 || opt.d == 0) throw InputError("toy dimensions must be positive");
  const Regularizer reg{opt.lambda, opt.radius};
  reg.validate();
  std::mt19937_64 gen(opt.seed);
  const std::size_t d = opt.d;

  switch (opt.kind) {
    case ToyKind::identity_quadratic: {
      const Vector center = detail::uniform_vector(gen, d, -opt.center_scale, opt.center_scale);
      std::vector<Vector> c, w;
      for (std::size_t i = 0; i < opt.n; ++i) {
        c.push_back(center + opt.center_spread * detail::uniform_vector(gen, d, -1.0, 1.0));
        w.push_back(Vector::Ones(d) + opt.weight_spread * detail::uniform_vector(gen, d, -1.0, 1.0));
      }
      // F(x) = sum_k [W̄_k x_k² − 2 q_k x_k] + const, separable.
      Vector wbar = Vector::Zero(d), q = Vector::Zero(d);
      for (std::size_t i = 0; i < opt.n; ++i) {
        wbar += w[i];
        q += w[i].cwiseProduct(c[i]);
      }
      wbar /= static_cast<double>(opt.n);
      q /= static_cast<double>(opt.n);
      Vector xs(d);
      for (std::size_t k = 0; k < d; ++k) {
        xs[k] = std::clamp(detail::soft_threshold(2.0 * q[k], opt.lambda) / (2.0 * wbar[k]),
                           -opt.radius, opt.radius);
      }
      double phi = 0.0;
      for (std::size_t i = 0; i < opt.n; ++i) {
        const Vector diff = xs - c[i];
        phi += diff.dot(w[i].cwiseProduct(diff));
      }
      phi = phi / static_cast<double>(opt.n) + opt.lambda * xs.lpNorm<1>();
      auto p = std::make_shared<const detail::IdentityQuadratic>(opt.m, std::move(c), std::move(w), reg);
      return ProblemInstance{p, xs, phi};
    }
    case ToyKind::affine_quadratic: {
      if (opt.lambda != 0.0) throw InputError("affine toy has a certified optimum only for lambda = 0");
      const std::size_t k = d + 1;
      Matrix base(k, d);
      for (std::size_t r = 0; r < k; ++r) base.row(r) = detail::uniform_vector(gen, d, -1.0, 1.0).transpose();
      base.topRows(d) += Matrix::Identity(d, d);
      std::vector<Matrix> A;
      std::vector<Vector> c, e, h;
      for (std::size_t j = 0; j < opt.m; ++j) {
        Matrix noise(k, d);
        for (std::size_t r = 0; r < k; ++r) noise.row(r) = detail::uniform_vector(gen, d, -0.5, 0.5).transpose();
        A.push_back(base + noise);
        c.push_back(detail::uniform_vector(gen, k, -0.5, 0.5));
      }
      for (std::size_t i = 0; i < opt.n; ++i) {
        e.push_back(detail::uniform_vector(gen, k, -1.0, 1.0));
        h.push_back(Vector::Ones(k) + opt.weight_spread * detail::uniform_vector(gen, k, -1.0, 1.0));
      }
      Matrix Abar = Matrix::Zero(k, d);
      Vector cbar = Vector::Zero(k), hbar = Vector::Zero(k), he = Vector::Zero(k);
      for (std::size_t j = 0; j < opt.m; ++j) {
        Abar += A[j];
        cbar += c[j];
      }
      Abar /= static_cast<double>(opt.m);
      cbar /= static_cast<double>(opt.m);
      for (std::size_t i = 0; i < opt.n; ++i) {
        hbar += h[i];
        he += h[i].cwiseProduct(e[i]);
      }
      hbar /= static_cast<double>(opt.n);
      he /= static_cast<double>(opt.n);
      // Shift every e_i so the stationarity condition holds at a chosen interior point.
      const Vector target = detail::uniform_vector(gen, d, -0.5 * opt.radius, 0.5 * opt.radius);
      const Vector shift = Abar * target + cbar - he.cwiseQuotient(hbar);
      for (auto& ei : e) ei += shift;
      double phi = 0.0;
      const Vector gx = Abar * target + cbar;
      for (std::size_t i = 0; i < opt.n; ++i) {
        const Vector diff = gx - e[i];
        phi += 0.5 * diff.dot(h[i].cwiseProduct(diff));
      }
      phi /= static_cast<double>(opt.n);
      auto p = std::make_shared<const detail::AffineQuadratic>(std::move(A), std::move(c), std::move(e),
                                                               std::move(h), reg);
      return ProblemInstance{p, target, phi};
    }
    case ToyKind::convex_sum: {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::vector<double> alpha(opt.m, 0.0);
      for (std::size_t j = 0; j + 1 < opt.m; j += 2) {
        const double a = 0.3 * u(gen);
        alpha[j] = a;
        alpha[j + 1] = -a;
      }
      const Vector dbar = detail::uniform_vector(gen, d, 0.5, 1.5);
      std::vector<Vector> D, c;
      for (std::size_t i = 0; i < opt.n; ++i) {
        if (i % 2 == 0 && i + 1 < opt.n) {
          const Vector delta = detail::uniform_vector(gen, d, -2.0, 2.0);
          D.push_back(dbar + delta);
          D.push_back(dbar - delta);
        } else if (i % 2 == 0) {
          D.push_back(dbar);
        }
        c.push_back(detail::uniform_vector(gen, d, -1.0, 1.0));
      }
      Vector Dmean = Vector::Zero(d), cmean = Vector::Zero(d);
      for (std::size_t i = 0; i < opt.n; ++i) {
        Dmean += D[i];
        cmean += c[i];
      }
      Dmean /= static_cast<double>(opt.n);
      cmean /= static_cast<double>(opt.n);
      Vector xs(d);
      for (std::size_t k = 0; k < d; ++k) {
        xs[k] = std::clamp(detail::soft_threshold(cmean[k], opt.lambda) / Dmean[k], -opt.radius,
                           opt.radius);
      }
      const double phi = 0.5 * xs.dot(Dmean.cwiseProduct(xs)) - cmean.dot(xs) +
                         opt.lambda * xs.lpNorm<1>();
      auto p = std::make_shared<const detail::ConvexSum>(std::move(alpha), 1.0, std::move(D),
                                                         std::move(c), reg);
      return ProblemInstance{p, xs, phi};
    }
  }
  throw InputError("unknown toy kind");
}

}  // namespace compopt

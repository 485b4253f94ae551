#pragma once

#include "compopt/problem.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace compopt {

/// Counts individual oracle samples. One inner sample is the pair
/// (g_j, dg_j) at one point; one outer sample is (f_i, grad f_i) at one point.
class SampleCounter {
 public:
  void charge(std::uint64_t samples) { total_ += samples; }
  std::uint64_t total() const { return total_; }

  /// True if `samples` more can be charged without exceeding `budget`.
  bool fits(std::uint64_t samples, const std::optional<std::uint64_t>& budget) const {
    return !budget || total_ + samples <= *budget;
  }

 private:
  std::uint64_t total_ = 0;
};

/// One row of a convergence trace.
struct TraceRecord {
  std::string algorithm;
  std::uint64_t seed = 0;
  std::int64_t epoch = 0;
  std::int64_t iteration = 0;
  std::uint64_t samples = 0;
  double samples_per_n = 0.0;
  double objective = 0.0;
  std::optional<double> gap;
  bool aborted = false;
};

/// A run stopped because an iterate or its objective stopped being finite or
/// blew up. Carries the rows recorded before the abort.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::vector<TraceRecord> partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}

  const std::vector<TraceRecord>& partial_trace() const { return partial_; }

 private:
  std::vector<TraceRecord> partial_;
};

/// Objective growth (relative to the first recorded value) treated as divergence.
inline constexpr double kDivergenceGrowth = 1e6;

/// Shared trace bookkeeping: every algorithm records through this so the
/// charging rules and schema stay identical across methods.
class TraceRecorder {
 public:
  TraceRecorder(const CompositionProblem& problem, std::string algorithm, std::uint64_t seed,
                std::size_t interval)
      : problem_(&problem),
        algorithm_(std::move(algorithm)),
        seed_(seed),
        interval_(interval == 0 ? 1 : interval) {}

  std::size_t interval() const { return interval_; }

  /// Records when `iteration` is a multiple of the interval.
  void maybe_record(std::int64_t epoch, std::int64_t iteration, std::uint64_t samples,
                    const ConstVectorRef& x) {
    if (iteration % static_cast<std::int64_t>(interval_) == 0) {
      record(epoch, iteration, samples, x);
    }
  }

  /// Records unconditionally unless a row already exists at this sample
  /// count, in which case the newer row replaces it.
  void record(std::int64_t epoch, std::int64_t iteration, std::uint64_t samples,
              const ConstVectorRef& x) {
    check_iterate(x);
    const double phi = objective(*problem_, x);
    if (!std::isfinite(phi)) fail("objective is not finite");
    if (!initial_) initial_ = phi;
    if (std::abs(phi) > kDivergenceGrowth * std::max(std::abs(*initial_), 1.0)) {
      fail("objective exceeded " + std::to_string(kDivergenceGrowth) + "x its initial value");
    }
    TraceRecord row{algorithm_, seed_, epoch, iteration, samples,
                    static_cast<double>(samples) /
                        static_cast<double>(problem_->dims().normalizer()),
                    phi, std::nullopt, false};
    if (!rows_.empty() && rows_.back().samples == samples) {
      rows_.back() = std::move(row);
    } else {
      rows_.push_back(std::move(row));
    }
  }

  /// Throws DivergenceError for non-finite iterates.
  void check_iterate(const ConstVectorRef& x) const {
    if (!x.allFinite()) fail("iterate is not finite");
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw DivergenceError(algorithm_ + " (seed " + std::to_string(seed_) + ") aborted: " + why,
                          rows_);
  }

  const std::vector<TraceRecord>& rows() const { return rows_; }
  std::vector<TraceRecord> take_rows() { return std::move(rows_); }

 private:
  const CompositionProblem* problem_;
  std::string algorithm_;
  std::uint64_t seed_;
  std::size_t interval_;
  std::optional<double> initial_;
  std::vector<TraceRecord> rows_;
};

/// Iterations between periodic trace rows: roughly one row per N samples.
inline std::size_t record_interval(const ProblemDims& dims, std::uint64_t samples_per_iteration) {
  const std::uint64_t per = std::max<std::uint64_t>(samples_per_iteration, 1);
  return static_cast<std::size_t>((dims.normalizer() + per - 1) / per);
}

/// Keeps at most `cap` rows: evenly strided, always keeping first and last.
inline std::vector<TraceRecord> decimate(std::vector<TraceRecord> rows, std::size_t cap) {
  if (cap < 2 || rows.size() <= cap) return rows;
  std::vector<TraceRecord> out;
  out.reserve(cap);
  const double stride = static_cast<double>(rows.size() - 1) / static_cast<double>(cap - 1);
  for (std::size_t i = 0; i < cap; ++i) {
    const auto idx = static_cast<std::size_t>(std::llround(stride * static_cast<double>(i)));
    out.push_back(rows[std::min(idx, rows.size() - 1)]);
  }
  return out;
}

/// Summary of one finished epoch of an epoch-based method.
struct EpochSummary {
  std::int64_t epoch = 0;        ///< 1-based epoch number s+1
  std::uint64_t length = 0;      ///< inner iterations k_{s+1}
  Vector x_tilde;                ///< reference point produced by the epoch
  Vector x_last;                 ///< last iterate of the epoch
  double last_step = 0.0;        ///< step used by the epoch's final update
  std::uint64_t samples_after = 0;
};

/// Output of any optimizer in the package.
struct RunResult {
  Vector x_out;
  std::vector<TraceRecord> trace;
  std::vector<EpochSummary> epochs;
  std::uint64_t samples = 0;
  bool truncated = false;  ///< stopped early on the sample budget
};

}  // namespace compopt

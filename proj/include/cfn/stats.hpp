#pragma once

#include <cstdint>
#include <vector>

#include "cfn/types.hpp"

namespace cfn {

/// Streaming mean/variance over a scalar stream (Welford recurrence).
/// variance() is the population (biased) variance.
struct RunningStats {
  std::int64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void update(double value);
  double variance() const { return count > 0 ? m2 / static_cast<double>(count) : 0.0; }

  /// (value - mean) / sqrt(variance + 1e-8). Requires at least one update.
  double normalize(double value) const;
};

/// Per-dimension running mean/variance for vector streams.
struct RunningVectorStats {
  std::int64_t count = 0;
  Vector mean;
  Vector m2;

  void update(const Eigen::Ref<const Vector>& value);
  Vector variance() const;
  Vector normalize(const Eigen::Ref<const Vector>& value) const;
};

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

/// Standard error of the mean from a population variance and sample count.
double standard_error(double variance, std::int64_t n);

/// Mean and standard error of a sample.
struct MeanAndError {
  double mean = 0.0;
  double stderr_ = 0.0;
};
MeanAndError mean_and_error(const std::vector<double>& values);

}  // namespace cfn

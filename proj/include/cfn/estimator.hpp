#pragma once

#include <cstdint>
#include <vector>

#include "cfn/rng.hpp"
#include "cfn/types.hpp"

namespace cfn {

/// d-dimensional average of coin-flip vectors, with the number of vectors
/// that went into the average. Entries lie in [-1, 1].
struct MeanFlips {
  Vector entries;
  std::int64_t sample_count = 0;
};

/// d i.i.d. fair draws from {-1, +1}. Deterministic given the rng state.
Vector sample_coin_flips(int d, Rng& rng);

/// Entrywise average of coin-flip vectors. All vectors must share the same
/// dimension and have entries exactly in {-1, +1}.
MeanFlips average_flips(const std::vector<Vector>& flips);

/// Inverse-count estimate (1/d) * ||z||^2 from an averaged flip vector z.
/// Unbiased for 1/n when z averages n fair coin-flip vectors.
double inverse_count_from_mean(const Eigen::Ref<const Vector>& mean_flips);

/// Exploration bonus sqrt(estimate), i.e. an estimate of 1/sqrt(N(s)).
/// No clamping: estimates above 1 pass through unchanged.
double bonus_from_inverse_count(double inverse_count);

/// Closed-form Var[z_n^2] for averages of n i.i.d. zero-mean unit-variance
/// draws with the given fourth moment:
///     E[X^4]/n^3 + 2/n^2 - 3/n^3.
/// With fourth_moment = 1 (the coin-flip law) this is 2/n^2 - 2/n^3, the
/// minimum over all admissible label distributions.
double estimator_variance(std::int64_t n, double fourth_moment);

}  // namespace cfn

#include "cfn/estimator.hpp"

#include <cmath>
#include <stdexcept>

namespace cfn {

Vector sample_coin_flips(int d, Rng& rng) {
  if (d < 1) throw std::invalid_argument("sample_coin_flips: d must be >= 1");
  Vector flips(d);
  rng.fill_rademacher(flips);
  return flips;
}

MeanFlips average_flips(const std::vector<Vector>& flips) {
  if (flips.empty()) throw std::invalid_argument("average_flips: empty sample");
  const Eigen::Index d = flips.front().size();
  Vector sum = Vector::Zero(d);
  for (const Vector& c : flips) {
    if (c.size() != d) throw std::invalid_argument("average_flips: dimension mismatch");
    for (Eigen::Index j = 0; j < d; ++j)
      if (c[j] != 1.0 && c[j] != -1.0)
        throw std::invalid_argument("average_flips: entries must be exactly -1 or +1");
    sum += c;
  }
  MeanFlips out;
  out.sample_count = static_cast<std::int64_t>(flips.size());
  out.entries = sum / static_cast<double>(out.sample_count);
  return out;
}

double inverse_count_from_mean(const Eigen::Ref<const Vector>& mean_flips) {
  if (mean_flips.size() == 0)
    throw std::invalid_argument("inverse_count_from_mean: empty vector");
  return mean_flips.squaredNorm() / static_cast<double>(mean_flips.size());
}

double bonus_from_inverse_count(double inverse_count) {
  if (inverse_count < 0.0)
    throw std::invalid_argument("bonus_from_inverse_count: negative estimate");
  return std::sqrt(inverse_count);
}

double estimator_variance(std::int64_t n, double fourth_moment) {
  if (n < 1) throw std::invalid_argument("estimator_variance: n must be >= 1");
  if (fourth_moment < 1.0)
    throw std::invalid_argument("estimator_variance: fourth moment below 1 is infeasible");
  const double nn = static_cast<double>(n);
  return fourth_moment / (nn * nn * nn) + 2.0 / (nn * nn) - 3.0 / (nn * nn * nn);
}

}  // namespace cfn

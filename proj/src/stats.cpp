#include "cfn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cfn {

namespace {
constexpr double kVarianceEps = 1e-8;
}

void RunningStats::update(double value) {
  if (!std::isfinite(value)) throw std::invalid_argument("RunningStats::update: non-finite value");
  ++count;
  const double delta = value - mean;
  mean += delta / static_cast<double>(count);
  m2 += delta * (value - mean);
}

double RunningStats::normalize(double value) const {
  if (count == 0) throw InvalidStateError("RunningStats::normalize: no observations");
  return (value - mean) / std::sqrt(variance() + kVarianceEps);
}

void RunningVectorStats::update(const Eigen::Ref<const Vector>& value) {
  if (!value.allFinite()) throw std::invalid_argument("RunningVectorStats::update: non-finite value");
  if (count == 0) {
    mean = Vector::Zero(value.size());
    m2 = Vector::Zero(value.size());
  }
  if (value.size() != mean.size())
    throw std::invalid_argument("RunningVectorStats::update: dimension mismatch");
  ++count;
  const Vector delta = value - mean;
  mean += delta / static_cast<double>(count);
  m2 += delta.cwiseProduct(value - mean);
}

Vector RunningVectorStats::variance() const {
  if (count == 0) return Vector();
  return m2 / static_cast<double>(count);
}

Vector RunningVectorStats::normalize(const Eigen::Ref<const Vector>& value) const {
  if (count == 0) throw InvalidStateError("RunningVectorStats::normalize: no observations");
  if (value.size() != mean.size())
    throw std::invalid_argument("RunningVectorStats::normalize: dimension mismatch");
  return (value - mean).cwiseQuotient((variance().array() + kVarianceEps).sqrt().matrix());
}

namespace {

// Ranks with ties replaced by the average rank of the tied block; 1-based.
std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("spearman: length mismatch");
  if (xs.size() < 2) throw std::invalid_argument("spearman: need at least two points");
  const std::vector<double> rx = average_ranks(xs);
  const std::vector<double> ry = average_ranks(ys);
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = rx[i] - mx;
    const double dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;  // a constant sequence carries no rank order
  return sxy / std::sqrt(sxx * syy);
}

double standard_error(double variance, std::int64_t n) {
  if (n <= 0) throw std::invalid_argument("standard_error: n must be positive");
  return std::sqrt(variance / static_cast<double>(n));
}

MeanAndError mean_and_error(const std::vector<double>& values) {
  MeanAndError out;
  if (values.empty()) return out;
  RunningStats s;
  for (double v : values) s.update(v);
  out.mean = s.mean;
  out.stderr_ = standard_error(s.variance(), s.count);
  return out;
}

}  // namespace cfn

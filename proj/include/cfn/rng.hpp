#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace cfn {

/// Seedable random source with deterministic, platform-independent output.
///
/// Wraps std::mt19937_64 (whose output sequence is fixed by the standard)
/// and hand-rolls all distributions on top of it, so that a given seed
/// produces the same draws on every platform and compiler. Distinct
/// experiment concerns (environment noise, coin flips, network init,
/// epsilon exploration, ...) each take their own stream via split().
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix(mix(seed))) {}

  /// Independent child stream. Children with different ids are decorrelated
  /// from each other and from the parent; splitting is a pure function of
  /// (seed, stream_id).
  Rng split(std::uint64_t stream_id) const {
    std::uint64_t s = seed_ ^ mix(stream_id * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL);
    return Rng(mix(s));
  }

  std::uint64_t bits() { return engine_(); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller. Consumes exactly two engine draws.
  double normal() {
    double u1 = static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  /// Uniform integer in [0, n). Rejection sampling keeps the draw exact.
  std::uint64_t uniform_int(std::uint64_t n) {
    const std::uint64_t limit = n * (UINT64_MAX / n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Single fair coin flip in {-1, +1}.
  double rademacher() {
    if (bits_left_ == 0) {
      bit_cache_ = engine_();
      bits_left_ = 64;
    }
    double r = (bit_cache_ & 1u) ? 1.0 : -1.0;
    bit_cache_ >>= 1;
    --bits_left_;
    return r;
  }

  /// Fills out with i.i.d. fair {-1, +1} draws (same stream as rademacher()).
  void fill_rademacher(Eigen::Ref<Eigen::VectorXd> out) {
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = rademacher();
  }

  std::uint64_t seed() const { return seed_; }

 private:
  static std::uint64_t mix(std::uint64_t x) {
    // SplitMix64 finalizer.
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::uint64_t bit_cache_ = 0;
  int bits_left_ = 0;
};

}  // namespace cfn

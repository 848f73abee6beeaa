#pragma once

#include <cstdint>
#include <vector>

#include "cfn/rng.hpp"
#include "cfn/types.hpp"

namespace cfn {

/// Flat-array segment tree over a fixed number of leaves; supports O(log n)
/// point updates and proportional sampling. Parents are recomputed from
/// their children on update, so the root stays consistent with the leaves
/// to rounding error.
class SumTree {
 public:
  explicit SumTree(int capacity);

  void set(int leaf, double value);
  double value(int leaf) const { return nodes_[capacity_ + leaf]; }
  double total() const { return capacity_ > 0 ? nodes_[1] : 0.0; }

  /// Leaf index whose cumulative-priority interval contains u in [0, total).
  int locate(double u) const;

  int capacity() const { return capacity_; }

 private:
  int capacity_;
  std::vector<double> nodes_;  // 1-based tree; leaves at [capacity_, 2*capacity_)
};

/// One stored (state, coin-flip label) pair.
struct BufferRecord {
  Vector state_encoding;
  Vector coin_flips;
  Vector prior_output;  // cached raw prior output; empty when no prior is used
  std::int64_t n_updates = 0;
  double priority = 0.0;
};

/// FIFO replay of coin-flip records with priority-proportional sampling.
///
/// Record ids are insertion indices; a record stays addressable until
/// `capacity` later inserts evict it. Sampling is with replacement and
/// increments each drawn record's n_updates. Single-writer.
class CoinFlipBuffer {
 public:
  explicit CoinFlipBuffer(int capacity, double priority_alpha = 0.5);

  /// Stores a record with n_updates = 0 and initial priority
  /// alpha * 1 + (1 - alpha) * novelty_estimate (the n_updates term of the
  /// priority formula evaluated at 1). Evicts the oldest record when full.
  std::uint64_t insert(Vector state_encoding, Vector coin_flips, double novelty_estimate,
                       Vector prior_output = Vector());

  /// batch_size ids drawn independently with probability proportional to
  /// priority. Throws EmptyBufferError when the buffer holds no records
  /// (a batch_size of 0 on a nonempty buffer returns an empty batch).
  std::vector<std::uint64_t> sample(int batch_size, Rng& rng);

  /// Uniform-over-records sampling with the same n_updates bookkeeping.
  std::vector<std::uint64_t> sample_uniform(int batch_size, Rng& rng);

  /// Replaces the record's priority with
  /// alpha / n_updates + (1 - alpha) * inverse_count_estimate.
  /// Requires that the record has been sampled at least once.
  double update_priority(std::uint64_t id, double inverse_count_estimate, double alpha);

  const BufferRecord& record(std::uint64_t id) const;
  bool contains(std::uint64_t id) const;
  std::vector<std::uint64_t> live_ids() const;

  std::size_t size() const;
  int capacity() const { return capacity_; }
  double priority_alpha() const { return alpha_; }
  double priority_total() const { return tree_.total(); }

 private:
  int slot_of(std::uint64_t id) const { return static_cast<int>(id % static_cast<std::uint64_t>(capacity_)); }
  BufferRecord& live_record(std::uint64_t id);

  int capacity_;
  double alpha_;
  std::vector<BufferRecord> slots_;
  SumTree tree_;
  std::uint64_t next_id_ = 0;
  Eigen::Index state_dim_ = -1;
};

}  // namespace cfn

#include "cfn/buffer.hpp"

#include <algorithm>
#include <stdexcept>

namespace cfn {

namespace {
// Keeps every live record reachable by sampling.
constexpr double kPriorityFloor = 1e-12;
}

SumTree::SumTree(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw std::invalid_argument("SumTree: capacity must be >= 1");
  nodes_.assign(2 * static_cast<std::size_t>(capacity), 0.0);
}

void SumTree::set(int leaf, double value) {
  std::size_t i = static_cast<std::size_t>(capacity_ + leaf);
  nodes_[i] = value;
  for (i /= 2; i >= 1; i /= 2) nodes_[i] = nodes_[2 * i] + nodes_[2 * i + 1];
}

int SumTree::locate(double u) const {
  std::size_t i = 1;
  while (i < static_cast<std::size_t>(capacity_)) {
    const std::size_t left = 2 * i;
    if (u < nodes_[left]) {
      i = left;
    } else {
      u -= nodes_[left];
      i = left + 1;
    }
  }
  return static_cast<int>(i) - capacity_;
}

CoinFlipBuffer::CoinFlipBuffer(int capacity, double priority_alpha)
    : capacity_(capacity), alpha_(priority_alpha), tree_(std::max(capacity, 1)) {
  if (capacity < 1) throw std::invalid_argument("CoinFlipBuffer: capacity must be >= 1");
  if (priority_alpha < 0.0 || priority_alpha > 1.0)
    throw std::invalid_argument("CoinFlipBuffer: alpha must lie in [0, 1]");
  slots_.resize(static_cast<std::size_t>(capacity));
}

std::size_t CoinFlipBuffer::size() const {
  return static_cast<std::size_t>(
      std::min<std::uint64_t>(next_id_, static_cast<std::uint64_t>(capacity_)));
}

bool CoinFlipBuffer::contains(std::uint64_t id) const {
  return id < next_id_ && next_id_ - id <= static_cast<std::uint64_t>(capacity_);
}

std::uint64_t CoinFlipBuffer::insert(Vector state_encoding, Vector coin_flips,
                                     double novelty_estimate, Vector prior_output) {
  if (novelty_estimate < 0.0)
    throw std::invalid_argument("CoinFlipBuffer::insert: negative novelty estimate");
  if (state_dim_ < 0)
    state_dim_ = state_encoding.size();
  else if (state_encoding.size() != state_dim_)
    throw std::invalid_argument("CoinFlipBuffer::insert: state dimension changed");

  const std::uint64_t id = next_id_++;
  const int slot = slot_of(id);
  BufferRecord& rec = slots_[static_cast<std::size_t>(slot)];
  rec.state_encoding = std::move(state_encoding);
  rec.coin_flips = std::move(coin_flips);
  rec.prior_output = std::move(prior_output);
  rec.n_updates = 0;
  rec.priority = std::max(alpha_ * 1.0 + (1.0 - alpha_) * novelty_estimate, kPriorityFloor);
  tree_.set(slot, rec.priority);
  return id;
}

std::vector<std::uint64_t> CoinFlipBuffer::sample(int batch_size, Rng& rng) {
  if (size() == 0) throw EmptyBufferError("CoinFlipBuffer::sample: buffer is empty");
  if (batch_size < 0) throw std::invalid_argument("CoinFlipBuffer::sample: negative batch size");
  std::vector<std::uint64_t> ids;
  ids.reserve(static_cast<std::size_t>(batch_size));
  const std::uint64_t oldest = next_id_ - size();
  for (int k = 0; k < batch_size; ++k) {
    int slot;
    do {
      slot = tree_.locate(rng.uniform() * tree_.total());
    } while (tree_.value(slot) <= 0.0);  // guards the floating-point edge at interval bounds
    // Map the slot back to its live id.
    std::uint64_t id = oldest + static_cast<std::uint64_t>(
        (slot - slot_of(oldest) + capacity_) % capacity_);
    BufferRecord& rec = slots_[static_cast<std::size_t>(slot)];
    rec.n_updates += 1;
    ids.push_back(id);
  }
  return ids;
}

std::vector<std::uint64_t> CoinFlipBuffer::sample_uniform(int batch_size, Rng& rng) {
  if (size() == 0) throw EmptyBufferError("CoinFlipBuffer::sample_uniform: buffer is empty");
  if (batch_size < 0)
    throw std::invalid_argument("CoinFlipBuffer::sample_uniform: negative batch size");
  std::vector<std::uint64_t> ids;
  ids.reserve(static_cast<std::size_t>(batch_size));
  const std::uint64_t oldest = next_id_ - size();
  for (int k = 0; k < batch_size; ++k) {
    const std::uint64_t id = oldest + rng.uniform_int(size());
    slots_[static_cast<std::size_t>(slot_of(id))].n_updates += 1;
    ids.push_back(id);
  }
  return ids;
}

double CoinFlipBuffer::update_priority(std::uint64_t id, double inverse_count_estimate,
                                       double alpha) {
  if (inverse_count_estimate < 0.0)
    throw std::invalid_argument("CoinFlipBuffer::update_priority: negative estimate");
  if (alpha < 0.0 || alpha > 1.0)
    throw std::invalid_argument("CoinFlipBuffer::update_priority: alpha must lie in [0, 1]");
  BufferRecord& rec = live_record(id);
  if (rec.n_updates < 1)
    throw InvalidStateError("CoinFlipBuffer::update_priority: record was never sampled");
  const double priority =
      alpha / static_cast<double>(rec.n_updates) + (1.0 - alpha) * inverse_count_estimate;
  rec.priority = std::max(priority, kPriorityFloor);
  tree_.set(slot_of(id), rec.priority);
  return rec.priority;
}

const BufferRecord& CoinFlipBuffer::record(std::uint64_t id) const {
  if (!contains(id)) throw NotFoundError("CoinFlipBuffer::record: no such record");
  return slots_[static_cast<std::size_t>(slot_of(id))];
}

BufferRecord& CoinFlipBuffer::live_record(std::uint64_t id) {
  if (!contains(id)) throw NotFoundError("CoinFlipBuffer: no such record");
  return slots_[static_cast<std::size_t>(slot_of(id))];
}

std::vector<std::uint64_t> CoinFlipBuffer::live_ids() const {
  std::vector<std::uint64_t> ids;
  ids.reserve(size());
  for (std::uint64_t id = next_id_ - size(); id < next_id_; ++id) ids.push_back(id);
  return ids;
}

}  // namespace cfn

#include "cfn/gridworld.hpp"

#include <cmath>
#include <stdexcept>

namespace cfn {

GridworldEnv::GridworldEnv(GridworldConfig config) : config_(config) {
  if (config.width < 1 || config.height < 1)
    throw std::invalid_argument("GridworldEnv: grid dimensions must be >= 1");
  if (config.max_steps_base < 1)
    throw std::invalid_argument("GridworldEnv: max_steps_base must be >= 1");
  if (config.action_noise < 0.0 || config.action_noise >= 1.0)
    throw std::invalid_argument("GridworldEnv: action_noise must lie in [0, 1)");
  max_steps_ = static_cast<int>(
      std::ceil(static_cast<double>(config.max_steps_base) / (1.0 - config.action_noise)));
}

Vector GridworldEnv::reset() {
  state_ = GridState{0, 0, 0};
  done_ = false;
  return encode(state_);
}

GridworldEnv::StepResult GridworldEnv::step(Action action, Rng& rng) {
  if (done_) throw InvalidStateError("GridworldEnv::step: episode is done; call reset()");

  Action executed = action;
  if (config_.action_noise > 0.0 && rng.uniform() < config_.action_noise)
    executed = static_cast<Action>(rng.uniform_int(kNumActions));

  switch (executed) {
    case Action::up:    state_.y = std::min(state_.y + 1, config_.height - 1); break;
    case Action::down:  state_.y = std::max(state_.y - 1, 0); break;
    case Action::left:  state_.x = std::max(state_.x - 1, 0); break;
    case Action::right: state_.x = std::min(state_.x + 1, config_.width - 1); break;
  }
  state_.t += 1;

  StepResult result;
  const bool at_goal = (state_.x == config_.width - 1 && state_.y == config_.height - 1);
  if (at_goal) {
    result.reward = 1.0;
    result.done = true;
  } else if (state_.t >= max_steps_) {
    result.done = true;
    result.truncated = true;
  }
  done_ = result.done;
  result.observation = encode(state_);
  return result;
}

Vector GridworldEnv::encode(const GridState& s) const {
  if (config_.encoding == Encoding::one_hot) {
    Vector obs = Vector::Zero(cell_count());
    obs[s.y * config_.width + s.x] = 1.0;
    return obs;
  }
  Vector obs(2);
  obs[0] = config_.width > 1 ? static_cast<double>(s.x) / (config_.width - 1) : 0.0;
  obs[1] = config_.height > 1 ? static_cast<double>(s.y) / (config_.height - 1) : 0.0;
  return obs;
}

int GridworldEnv::observation_dim() const {
  return config_.encoding == Encoding::one_hot ? cell_count() : 2;
}

GroundTruthCounter::GroundTruthCounter(int width, int height)
    : width_(width), height_(height), counts_(static_cast<std::size_t>(width * height), 0) {
  if (width < 1 || height < 1)
    throw std::invalid_argument("GroundTruthCounter: dimensions must be >= 1");
}

void GroundTruthCounter::record(int x, int y) {
  if (x < 0 || x >= width_ || y < 0 || y >= height_)
    throw std::invalid_argument("GroundTruthCounter::record: cell out of range");
  counts_[static_cast<std::size_t>(y * width_ + x)] += 1;
  total_ += 1;
}

std::int64_t GroundTruthCounter::count(int x, int y) const {
  if (x < 0 || x >= width_ || y < 0 || y >= height_)
    throw std::invalid_argument("GroundTruthCounter::count: cell out of range");
  return counts_[static_cast<std::size_t>(y * width_ + x)];
}

double GroundTruthCounter::true_bonus(int x, int y) const {
  const std::int64_t n = count(x, y);
  return n > 0 ? 1.0 / std::sqrt(static_cast<double>(n)) : 1.0;
}

}  // namespace cfn

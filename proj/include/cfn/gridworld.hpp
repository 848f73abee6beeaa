#pragma once

#include <cstdint>
#include <vector>

#include "cfn/rng.hpp"
#include "cfn/types.hpp"

namespace cfn {

enum class Action { up = 0, down = 1, left = 2, right = 3 };
inline constexpr int kNumActions = 4;

enum class Encoding { one_hot, coordinates };

struct GridworldConfig {
  int width = 10;
  int height = 10;
  int max_steps_base = 150;
  double action_noise = 0.0;  // eta: probability the chosen action is replaced
  Encoding encoding = Encoding::one_hot;
};

struct GridState {
  int x = 0;
  int y = 0;
  int t = 0;
};

/// Sparse-reward gridworld: start at the bottom-left (0,0), terminal reward
/// 1 at the top-right, episode capped at ceil(max_steps_base / (1 - eta))
/// steps. With probability eta the executed action is drawn uniformly from
/// all four actions; moves into walls leave the position unchanged.
class GridworldEnv {
 public:
  explicit GridworldEnv(GridworldConfig config);

  Vector reset();

  struct StepResult {
    Vector observation;
    double reward = 0.0;
    bool done = false;
    bool truncated = false;  // done by time limit rather than by the goal
  };
  /// Throws InvalidStateError when the episode is already done. With
  /// eta = 0 no randomness is consumed.
  StepResult step(Action action, Rng& rng);

  Vector encode(const GridState& s) const;
  const GridState& state() const { return state_; }
  bool done() const { return done_; }
  int effective_max_steps() const { return max_steps_; }
  int observation_dim() const;
  int cell_count() const { return config_.width * config_.height; }
  const GridworldConfig& config() const { return config_; }

 private:
  GridworldConfig config_;
  GridState state_;
  int max_steps_;
  bool done_ = true;  // requires reset() before the first step
};

/// Exact per-cell visit counts for evaluating predicted bonuses.
class GroundTruthCounter {
 public:
  GroundTruthCounter(int width, int height);

  void record(int x, int y);
  std::int64_t count(int x, int y) const;
  std::int64_t total() const { return total_; }

  /// 1/sqrt(N); 1 for never-visited cells (the optimistic convention the
  /// prior initialization targets).
  double true_bonus(int x, int y) const;

  int width() const { return width_; }
  int height() const { return height_; }

 private:
  int width_, height_;
  std::vector<std::int64_t> counts_;
  std::int64_t total_ = 0;
};

}  // namespace cfn

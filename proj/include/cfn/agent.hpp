#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <vector>

#include "cfn/buffer.hpp"
#include "cfn/cfn_model.hpp"
#include "cfn/gridworld.hpp"
#include "cfn/mlp.hpp"
#include "cfn/rnd.hpp"
#include "cfn/rng.hpp"
#include "cfn/stats.hpp"
#include "cfn/types.hpp"

namespace cfn {

enum class BonusSource { none, cfn, rnd };
enum class QBackend { tabular, mlp };

struct AgentConfig {
  double discount = 0.99;          // gamma
  double intrinsic_scale = 0.01;   // lambda
  double learning_rate = 0.5;      // tabular Q step size
  double epsilon = 0.0;            // epsilon-greedy; 0 keeps action selection greedy
  QBackend q_backend = QBackend::tabular;
  BonusSource bonus_source = BonusSource::cfn;
  bool reward_normalization = true;
  // MLP backend knobs
  std::vector<int> q_hidden = {64, 64};
  double q_learning_rate = 1e-3;
  int q_replay_capacity = 10000;
  int q_batch_size = 32;
  int q_target_sync_period = 1000;
};

struct TransitionRecord {
  Vector state;
  int action = 0;
  double extrinsic = 0.0;
  double bonus = 0.0;  // recorded at visit time, fixed thereafter
  Vector next_state;
  bool terminal = false;   // goal reached: no bootstrap
  bool truncated = false;  // time limit: bootstraps
};

/// Bonus-augmented Q target R + lambda * B + gamma * max_a' Q(s', a').
/// Terminal transitions drop the bootstrap term; truncated ones keep it.
double augmented_target(const TransitionRecord& record, double q_next_max, double discount,
                        double intrinsic_scale);

/// Greedy argmax with ties resolved to the lowest action index.
int greedy_action(const Eigen::Ref<const Vector>& q_values);

/// Q-function with a tabular or MLP backend behind one interface. The
/// tabular backend indexes states directly; the MLP backend trains on a
/// small uniform replay with a periodically synced target network.
class QLearner {
 public:
  QLearner(const AgentConfig& config, int observation_dim, int state_count, Rng init_rng);

  /// Epsilon-greedy action. Consumes randomness only when epsilon > 0.
  int act(const Eigen::Ref<const Vector>& observation, int state_index, Rng& explore_rng);

  Vector q_values(const Eigen::Ref<const Vector>& observation, int state_index) const;

  /// One Q update from this transition. The tabular backend updates online;
  /// the MLP backend pushes into replay and trains a minibatch once enough
  /// history exists (replay sampling draws from replay_rng).
  void update(const TransitionRecord& record, int state_index, int next_state_index,
              Rng& replay_rng);

 private:
  AgentConfig config_;
  // tabular
  Matrix table_;  // state_count x actions
  // mlp
  MlpParams q_net_;
  MlpParams q_target_;
  AdamState q_opt_;
  std::deque<TransitionRecord> replay_;
  std::int64_t updates_done_ = 0;
};

/// Per-interaction record emitted by the integrated agent loop.
struct StepMetrics {
  int episode = 0;
  int t = 0;  // step index within the episode (of the pre-step state)
  int x = 0, y = 0;
  int action = 0;
  double extrinsic = 0.0;
  double bonus_raw = 0.0;
  double bonus_stored = 0.0;
  double bonus_loss = 0.0;
  bool episode_end = false;
  bool reached_goal = false;
};

struct EpisodeRow {
  int episode = 0;
  int steps = 0;
  double return_ = 0.0;      // extrinsic return
  double mean_bonus = 0.0;   // mean raw bonus over the episode
  int unique_states = 0;     // cumulative unique cells visited so far
  bool reached_goal = false; // false means the episode timed out (truncated)
};

/// One experiment's agent loop: environment, Q-learner and bonus module
/// wired together, one interaction per step() call. All randomness flows
/// through per-concern streams split from the run seed, so disabling the
/// bonus module does not perturb the trajectory.
class RlDriver {
 public:
  struct Config {
    GridworldConfig env;
    AgentConfig agent;
    CfnConfig cfn;
    RndConfig rnd;
    int bonus_batch_size = 256;
    int bonus_buffer_capacity = 100000;
    std::uint64_t seed = 0;
  };

  explicit RlDriver(const Config& config);

  StepMetrics step();

  const GridworldEnv& env() const { return env_; }
  const GroundTruthCounter& counter() const { return counter_; }
  const QLearner& q_learner() const { return q_; }
  const std::vector<EpisodeRow>& episodes() const { return episodes_; }
  const CfnModel* cfn_model() const { return cfn_model_ ? cfn_model_.get() : nullptr; }
  const RndModel* rnd_model() const { return rnd_model_ ? rnd_model_.get() : nullptr; }
  int unique_states_visited() const;

 private:
  int state_index(const GridState& s) const { return s.y * config_.env.width + s.x; }
  double compute_bonus(const Eigen::Ref<const Vector>& observation) const;

  Config config_;
  GridworldEnv env_;
  GroundTruthCounter counter_;
  QLearner q_;
  std::unique_ptr<CfnModel> cfn_model_;
  std::unique_ptr<CoinFlipBuffer> cfn_buffer_;
  std::unique_ptr<RndModel> rnd_model_;
  std::unique_ptr<StateReplay> rnd_replay_;
  RunningStats reward_stats_;

  Rng rng_env_;
  Rng rng_explore_;
  Rng rng_flips_;
  Rng rng_batch_;
  Rng rng_q_;

  Vector obs_;
  GridState pre_state_;
  int episode_ = 0;
  int episode_steps_ = 0;
  double episode_return_ = 0.0;
  double episode_bonus_sum_ = 0.0;
  std::vector<EpisodeRow> episodes_;
};

}  // namespace cfn

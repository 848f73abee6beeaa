#include "cfn/agent.hpp"

#include <cmath>
#include <stdexcept>

namespace cfn {

double augmented_target(const TransitionRecord& record, double q_next_max, double discount,
                        double intrinsic_scale) {
  double target = record.extrinsic + intrinsic_scale * record.bonus;
  if (!record.terminal) target += discount * q_next_max;
  return target;
}

int greedy_action(const Eigen::Ref<const Vector>& q_values) {
  int best = 0;
  for (int a = 1; a < q_values.size(); ++a)
    if (q_values[a] > q_values[best]) best = a;
  return best;
}

QLearner::QLearner(const AgentConfig& config, int observation_dim, int state_count, Rng init_rng)
    : config_(config) {
  if (config.q_backend == QBackend::tabular) {
    if (state_count < 1) throw std::invalid_argument("QLearner: tabular backend needs state_count");
    table_ = Matrix::Zero(state_count, kNumActions);
  } else {
    MlpSpec spec;
    spec.input_dim = observation_dim;
    spec.hidden_layers = config.q_hidden;
    spec.output_dim = kNumActions;
    spec.activation = Activation::relu;
    q_net_ = init_params(spec, init_rng);
    q_target_ = q_net_;
    q_opt_ = make_adam_state(q_net_);
  }
}

Vector QLearner::q_values(const Eigen::Ref<const Vector>& observation, int state_index) const {
  if (config_.q_backend == QBackend::tabular) return table_.row(state_index).transpose();
  return forward(q_net_, observation);
}

int QLearner::act(const Eigen::Ref<const Vector>& observation, int state_index,
                  Rng& explore_rng) {
  if (config_.epsilon > 0.0 && explore_rng.uniform() < config_.epsilon)
    return static_cast<int>(explore_rng.uniform_int(kNumActions));
  return greedy_action(q_values(observation, state_index));
}

void QLearner::update(const TransitionRecord& record, int state_index, int next_state_index,
                      Rng& replay_rng) {
  if (config_.q_backend == QBackend::tabular) {
    const double q_next = table_.row(next_state_index).maxCoeff();
    const double target =
        augmented_target(record, q_next, config_.discount, config_.intrinsic_scale);
    double& q = table_(state_index, record.action);
    q += config_.learning_rate * (target - q);
    return;
  }

  replay_.push_back(record);
  if (static_cast<int>(replay_.size()) > config_.q_replay_capacity) replay_.pop_front();
  if (static_cast<int>(replay_.size()) < config_.q_batch_size) return;

  const int batch = config_.q_batch_size;
  Matrix inputs(batch, record.state.size());
  std::vector<const TransitionRecord*> picked(static_cast<std::size_t>(batch));
  for (int k = 0; k < batch; ++k) {
    picked[static_cast<std::size_t>(k)] = &replay_[replay_rng.uniform_int(replay_.size())];
    inputs.row(k) = picked[static_cast<std::size_t>(k)]->state.transpose();
  }
  Matrix next_inputs(batch, record.state.size());
  for (int k = 0; k < batch; ++k)
    next_inputs.row(k) = picked[static_cast<std::size_t>(k)]->next_state.transpose();

  const Matrix q_now = forward_batch(q_net_, inputs);
  const Matrix q_next = forward_batch(q_target_, next_inputs);
  // Regress only the chosen action's value: targets equal the current
  // prediction except at the taken action.
  Matrix targets = q_now;
  for (int k = 0; k < batch; ++k) {
    const TransitionRecord& r = *picked[static_cast<std::size_t>(k)];
    targets(k, r.action) =
        augmented_target(r, q_next.row(k).maxCoeff(), config_.discount, config_.intrinsic_scale);
  }
  mse_grad_step(q_net_, inputs, targets, Vector::Ones(batch), q_opt_, config_.q_learning_rate);

  ++updates_done_;
  if (updates_done_ % config_.q_target_sync_period == 0) q_target_ = q_net_;
}

RlDriver::RlDriver(const Config& config)
    : config_(config),
      env_(config.env),
      counter_(config.env.width, config.env.height),
      q_(config.agent, env_.observation_dim(), config.env.width * config.env.height,
         Rng(config.seed).split(3)),
      rng_env_(Rng(config.seed).split(1)),
      rng_explore_(Rng(config.seed).split(2)),
      rng_flips_(Rng(config.seed).split(5)),
      rng_batch_(Rng(config.seed).split(6)),
      rng_q_(Rng(config.seed).split(7)) {
  Rng init_rng = Rng(config.seed).split(4);
  if (config.agent.bonus_source == BonusSource::cfn) {
    CfnConfig cfn_config = config.cfn;
    cfn_config.net.input_dim = env_.observation_dim();
    cfn_model_ = std::make_unique<CfnModel>(make_cfn_model(cfn_config, init_rng));
    cfn_buffer_ = std::make_unique<CoinFlipBuffer>(config.bonus_buffer_capacity,
                                                   cfn_config.priority_alpha);
  } else if (config.agent.bonus_source == BonusSource::rnd) {
    RndConfig rnd_config = config.rnd;
    rnd_config.net.input_dim = env_.observation_dim();
    rnd_model_ = std::make_unique<RndModel>(make_rnd_model(rnd_config, init_rng));
    rnd_replay_ = std::make_unique<StateReplay>(
        static_cast<std::size_t>(config.bonus_buffer_capacity));
  }

  obs_ = env_.reset();
  pre_state_ = env_.state();
  // Prime the prior normalizer with the start state so the first bonus
  // evaluation has statistics to normalize against.
  if (cfn_model_ && cfn_model_->config.prior_enabled)
    cfn_model_->prior_stats.update(forward(cfn_model_->prior, obs_));
}

double RlDriver::compute_bonus(const Eigen::Ref<const Vector>& observation) const {
  switch (config_.agent.bonus_source) {
    case BonusSource::cfn: return cfn_bonus(*cfn_model_, observation);
    case BonusSource::rnd: return rnd_bonus(*rnd_model_, observation);
    case BonusSource::none: return 0.0;
  }
  return 0.0;
}

StepMetrics RlDriver::step() {
  if (env_.done()) {
    obs_ = env_.reset();
    pre_state_ = env_.state();
  }

  StepMetrics metrics;
  metrics.episode = episode_;
  metrics.t = pre_state_.t;
  metrics.x = pre_state_.x;
  metrics.y = pre_state_.y;

  const Vector state_obs = obs_;
  const GridState state_snapshot = pre_state_;
  const int s_index = state_index(state_snapshot);

  const int action = q_.act(state_obs, s_index, rng_explore_);
  metrics.action = action;

  const GridworldEnv::StepResult result = env_.step(static_cast<Action>(action), rng_env_);
  metrics.extrinsic = result.reward;

  // Bonus for the pre-step state, computed before its coin flips exist.
  metrics.bonus_raw = compute_bonus(state_obs);

  counter_.record(state_snapshot.x, state_snapshot.y);
  if (cfn_model_) observe(*cfn_model_, *cfn_buffer_, state_obs, rng_flips_);
  if (rnd_model_) {
    rnd_observe(*rnd_model_, state_obs);
    rnd_replay_->push(state_obs);
  }

  double stored = metrics.bonus_raw;
  if (config_.agent.reward_normalization) {
    reward_stats_.update(metrics.bonus_raw);
    stored = reward_stats_.normalize(metrics.bonus_raw);
  }
  metrics.bonus_stored = stored;

  TransitionRecord record;
  record.state = state_obs;
  record.action = action;
  record.extrinsic = result.reward;
  record.bonus = stored;
  record.next_state = result.observation;
  record.truncated = result.truncated;
  record.terminal = result.done && !result.truncated;

  q_.update(record, s_index, state_index(env_.state()), rng_q_);

  if (cfn_model_)
    metrics.bonus_loss = cfn_train_step(*cfn_model_, *cfn_buffer_, config_.bonus_batch_size,
                                        rng_batch_);
  if (rnd_model_)
    metrics.bonus_loss = rnd_train_step(
        *rnd_model_, rnd_replay_->sample_batch(config_.bonus_batch_size, rng_batch_),
        config_.rnd.learning_rate);

  episode_steps_ += 1;
  episode_return_ += result.reward;
  episode_bonus_sum_ += metrics.bonus_raw;
  obs_ = result.observation;
  pre_state_ = env_.state();

  if (result.done) {
    metrics.episode_end = true;
    metrics.reached_goal = !result.truncated;
    EpisodeRow row;
    row.episode = episode_;
    row.steps = episode_steps_;
    row.return_ = episode_return_;
    row.mean_bonus = episode_bonus_sum_ / episode_steps_;
    row.unique_states = unique_states_visited();
    row.reached_goal = !result.truncated;
    episodes_.push_back(row);
    episode_ += 1;
    episode_steps_ = 0;
    episode_return_ = 0.0;
    episode_bonus_sum_ = 0.0;
  }
  return metrics;
}

int RlDriver::unique_states_visited() const {
  int unique = 0;
  for (int y = 0; y < config_.env.height; ++y)
    for (int x = 0; x < config_.env.width; ++x)
      if (counter_.count(x, y) > 0) ++unique;
  return unique;
}

}  // namespace cfn

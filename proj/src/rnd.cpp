#include "cfn/rnd.hpp"

#include <cmath>
#include <stdexcept>

namespace cfn {

RndModel make_rnd_model(const RndConfig& config, Rng& init_rng) {
  RndModel model;
  model.config = config;
  Rng target_rng = init_rng.split(0);
  Rng predictor_rng = init_rng.split(1);
  model.target = init_params(config.net, target_rng);
  model.predictor = init_params(config.net, predictor_rng);
  model.optimizer = make_adam_state(model.predictor);
  return model;
}

double rnd_bonus(const RndModel& model, const Eigen::Ref<const Vector>& state) {
  const double raw = (forward(model.predictor, state) - forward(model.target, state)).squaredNorm();
  if (model.config.normalize_bonus && model.bonus_stats.count > 0)
    return model.bonus_stats.normalize(raw);
  return raw;
}

void rnd_observe(RndModel& model, const Eigen::Ref<const Vector>& state) {
  if (!model.config.normalize_bonus) return;
  const double raw = (forward(model.predictor, state) - forward(model.target, state)).squaredNorm();
  model.bonus_stats.update(raw);
}

double rnd_train_step(RndModel& model, const Eigen::Ref<const Matrix>& states,
                      double learning_rate) {
  if (states.rows() == 0) throw std::invalid_argument("rnd_train_step: empty batch");
  const Matrix targets = forward_batch(model.target, states);
  return mse_grad_step(model.predictor, states, targets, Vector::Ones(states.rows()),
                       model.optimizer, learning_rate);
}

void StateReplay::push(Vector state) {
  states_.push_back(std::move(state));
  if (states_.size() > capacity_) states_.pop_front();
}

Matrix StateReplay::sample_batch(int batch_size, Rng& rng) const {
  if (states_.empty()) throw EmptyBufferError("StateReplay::sample_batch: empty replay");
  if (batch_size < 1) throw std::invalid_argument("StateReplay::sample_batch: bad batch size");
  Matrix batch(batch_size, states_.front().size());
  for (int k = 0; k < batch_size; ++k)
    batch.row(k) = states_[rng.uniform_int(states_.size())].transpose();
  return batch;
}

}  // namespace cfn

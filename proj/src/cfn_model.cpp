#include "cfn/cfn_model.hpp"

#include <cmath>
#include <stdexcept>

#include "cfn/estimator.hpp"

namespace cfn {

namespace {
constexpr double kNormalizerEps = 1e-8;
}

CfnModel make_cfn_model(const CfnConfig& config, Rng& init_rng) {
  if (config.flip_count < 1)
    throw std::invalid_argument("make_cfn_model: flip_count must be >= 1");
  if (config.net.output_dim != config.flip_count)
    throw std::invalid_argument("make_cfn_model: net output_dim must equal flip_count");
  CfnModel model;
  model.config = config;
  Rng trainable_rng = init_rng.split(0);
  Rng prior_rng = init_rng.split(1);
  model.trainable = init_params(config.net, trainable_rng);
  model.prior = init_params(config.net, prior_rng);
  model.optimizer = make_adam_state(model.trainable);
  return model;
}

Vector normalize_prior_output(const CfnModel& model, const Eigen::Ref<const Vector>& raw) {
  if (model.prior_stats.count == 0)
    throw InvalidStateError("normalize_prior_output: prior normalizer has no observations");
  if (model.config.subtract_prior_mean) return model.prior_stats.normalize(raw);
  // Unit second moment without centering: divide by sqrt(E[raw^2]).
  const Vector second_moment =
      model.prior_stats.variance() + model.prior_stats.mean.cwiseProduct(model.prior_stats.mean);
  return raw.cwiseQuotient((second_moment.array() + kNormalizerEps).sqrt().matrix());
}

Vector cfn_output(const CfnModel& model, const Eigen::Ref<const Vector>& state) {
  Vector out = forward(model.trainable, state);
  if (model.config.prior_enabled)
    out += normalize_prior_output(model, forward(model.prior, state));
  return out;
}

double cfn_inverse_count(const CfnModel& model, const Eigen::Ref<const Vector>& state) {
  return inverse_count_from_mean(cfn_output(model, state));
}

double cfn_bonus(const CfnModel& model, const Eigen::Ref<const Vector>& state) {
  return bonus_from_inverse_count(cfn_inverse_count(model, state));
}

std::uint64_t observe(CfnModel& model, CoinFlipBuffer& buffer,
                      const Eigen::Ref<const Vector>& state, Rng& rng) {
  Vector raw_prior = forward(model.prior, state);
  model.prior_stats.update(raw_prior);

  Vector flips = model.config.zero_flip_mode ? Vector::Zero(model.config.flip_count)
                                             : sample_coin_flips(model.config.flip_count, rng);

  Vector estimate_output = forward(model.trainable, state);
  if (model.config.prior_enabled) estimate_output += normalize_prior_output(model, raw_prior);
  const double estimate = inverse_count_from_mean(estimate_output);

  return buffer.insert(state, std::move(flips), estimate, std::move(raw_prior));
}

double cfn_train_step(CfnModel& model, CoinFlipBuffer& buffer, int batch_size, Rng& rng) {
  if (batch_size < 1) throw std::invalid_argument("cfn_train_step: batch_size must be >= 1");
  const std::vector<std::uint64_t> ids = model.config.prioritization_enabled
                                             ? buffer.sample(batch_size, rng)
                                             : buffer.sample_uniform(batch_size, rng);

  const Eigen::Index p = buffer.record(ids.front()).state_encoding.size();
  const int d = model.config.flip_count;
  Matrix inputs(batch_size, p);
  Matrix targets(batch_size, d);
  for (int k = 0; k < batch_size; ++k) {
    const BufferRecord& rec = buffer.record(ids[static_cast<std::size_t>(k)]);
    inputs.row(k) = rec.state_encoding.transpose();
    if (model.config.prior_enabled)
      targets.row(k) =
          (rec.coin_flips - normalize_prior_output(model, rec.prior_output)).transpose();
    else
      targets.row(k) = rec.coin_flips.transpose();
  }

  const double loss = mse_grad_step(model.trainable, inputs, targets, Vector::Ones(batch_size),
                                    model.optimizer, model.config.learning_rate);

  // Refresh sampled priorities with post-step estimates.
  const Matrix outputs = forward_batch(model.trainable, inputs);
  for (int k = 0; k < batch_size; ++k) {
    Vector out = outputs.row(k).transpose();
    if (model.config.prior_enabled)
      out += normalize_prior_output(model, buffer.record(ids[static_cast<std::size_t>(k)]).prior_output);
    buffer.update_priority(ids[static_cast<std::size_t>(k)], inverse_count_from_mean(out),
                           model.config.priority_alpha);
  }
  return loss;
}

}  // namespace cfn

#include <doctest.h>

#include <cmath>

#include "cfn/cfn_model.hpp"
#include "cfn/checkpoint.hpp"
#include "cfn/estimator.hpp"
#include "cfn/rng.hpp"
#include "cfn/stats.hpp"

using namespace cfn;

namespace {

CfnConfig small_config(int input_dim, int d, bool prior, bool prioritized,
                       std::vector<int> hidden = {}) {
  CfnConfig c;
  c.flip_count = d;
  c.net.input_dim = input_dim;
  c.net.hidden_layers = std::move(hidden);
  c.net.output_dim = d;
  c.net.activation = Activation::relu;
  c.prior_enabled = prior;
  c.prioritization_enabled = prioritized;
  c.learning_rate = 1e-2;
  return c;
}

Vector one_hot(int dim, int k) {
  Vector v = Vector::Zero(dim);
  v[k] = 1.0;
  return v;
}

}  // namespace

TEST_CASE("bonus requires a primed normalizer when the prior is enabled") {
  Rng rng(1);
  CfnModel model = make_cfn_model(small_config(4, 8, true, true), rng);
  CHECK_THROWS_AS(cfn_bonus(model, one_hot(4, 0)), InvalidStateError);
}

TEST_CASE("prior disabled, zero trainable net gives bonus zero") {
  Rng rng(2);
  CfnModel model = make_cfn_model(small_config(4, 8, false, true), rng);
  for (auto& w : model.trainable.weights) w.setZero();
  for (auto& b : model.trainable.biases) b.setZero();
  CHECK(cfn_bonus(model, one_hot(4, 1)) == 0.0);
}

TEST_CASE("untrained model with normalized prior starts near bonus 1") {
  // f_hat ~ 0 (zeroed) and a normalized prior: novel states get bonus ~ 1,
  // averaged over 110 never-observed states.
  Rng rng(3);
  const int dim = 220, d = 20;
  CfnModel model = make_cfn_model(small_config(dim, d, true, true, {32}), rng);
  for (auto& w : model.trainable.weights) w.setZero();
  for (auto& b : model.trainable.biases) b.setZero();

  // Normalizer learns statistics over half the states.
  for (int k = 0; k < dim / 2; ++k)
    model.prior_stats.update(forward(model.prior, one_hot(dim, k)));

  RunningStats bonus_on_novel;
  for (int k = dim / 2; k < dim; ++k)
    bonus_on_novel.update(cfn_bonus(model, one_hot(dim, k)));
  CHECK(bonus_on_novel.count >= 100);
  CHECK(bonus_on_novel.mean > 0.7);
  CHECK(bonus_on_novel.mean < 1.3);
}

TEST_CASE("observe stores fresh flips, zero flips in zero-flip mode") {
  Rng rng(4), flips_rng(5);
  CfnConfig config = small_config(4, 6, true, true);
  CfnModel model = make_cfn_model(config, rng);
  CoinFlipBuffer buffer(16);

  const auto id1 = observe(model, buffer, one_hot(4, 2), flips_rng);
  CHECK(model.prior_stats.count == 1);
  const auto id2 = observe(model, buffer, one_hot(4, 2), flips_rng);
  CHECK(model.prior_stats.count == 2);
  CHECK(id1 != id2);
  // each visit gets its own flips; with 6 dims a collision is rare but
  // possible, so check vectors are valid signs rather than distinct
  for (auto id : {id1, id2})
    for (int j = 0; j < 6; ++j)
      CHECK(std::abs(buffer.record(id).coin_flips[j]) == 1.0);

  config.zero_flip_mode = true;
  Rng rng2(6);
  CfnModel zero_model = make_cfn_model(config, rng2);
  CoinFlipBuffer zero_buffer(16);
  const auto zid = observe(zero_model, zero_buffer, one_hot(4, 1), flips_rng);
  CHECK(zero_buffer.record(zid).coin_flips.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("train step loss decreases on a repeated record (prior off)") {
  Rng rng(7), flips_rng(8), batch_rng(9);
  CfnModel model = make_cfn_model(small_config(4, 6, false, true), rng);
  CoinFlipBuffer buffer(4);
  observe(model, buffer, one_hot(4, 0), flips_rng);

  const double first = cfn_train_step(model, buffer, 8, batch_rng);
  double last = first;
  for (int i = 0; i < 100; ++i) last = cfn_train_step(model, buffer, 8, batch_rng);
  CHECK(last < first);
}

TEST_CASE("learning rate zero leaves params fixed but refreshes priorities") {
  Rng rng(10), flips_rng(11), batch_rng(12);
  CfnConfig config = small_config(4, 6, false, true);
  config.learning_rate = 0.0;
  CfnModel model = make_cfn_model(config, rng);
  CoinFlipBuffer buffer(4);
  const auto id = observe(model, buffer, one_hot(4, 0), flips_rng);
  const double before = buffer.record(id).priority;
  const MlpParams params_before = model.trainable;

  const double loss1 = cfn_train_step(model, buffer, 4, batch_rng);
  const double loss2 = cfn_train_step(model, buffer, 4, batch_rng);
  CHECK(loss1 == loss2);  // params untouched
  for (std::size_t l = 0; l < params_before.weights.size(); ++l)
    CHECK(model.trainable.weights[l] == params_before.weights[l]);
  CHECK(buffer.record(id).priority != before);  // Eq-6 refresh with n_updates > 0
  CHECK(buffer.record(id).n_updates > 0);
}

TEST_CASE("single state visited n times converges to inverse count (prior off)") {
  // n = 4 copies of one one-hot state, linear net: expected bonus^2 = 1/4.
  // Average the converged estimate over independent label redraws.
  const int n = 4, d = 20;
  Rng redraw_rng(13);
  RunningStats estimates;
  const int redraws = 60;
  for (int r = 0; r < redraws; ++r) {
    Rng init(100 + r), flips(200 + r), batch(300 + r);
    CfnModel model = make_cfn_model(small_config(3, d, false, true), init);
    CoinFlipBuffer buffer(8);
    for (int i = 0; i < n; ++i) observe(model, buffer, one_hot(3, 1), flips);
    for (int step = 0; step < 3000; ++step) cfn_train_step(model, buffer, 16, batch);
    estimates.update(cfn_inverse_count(model, one_hot(3, 1)));
  }
  // E[estimate] = 1/n with variance (1/d)(2/n^2 - 2/n^3) per redraw
  const double se = standard_error(estimates.variance(), estimates.count);
  CHECK(std::abs(estimates.mean - 0.25) <= 3.0 * se + 1e-6);
}

TEST_CASE("prior parameters never change during training") {
  Rng rng(14), flips_rng(15), batch_rng(16);
  CfnModel model = make_cfn_model(small_config(6, 8, true, true, {16}), rng);
  CoinFlipBuffer buffer(32);
  const double checksum_before = params_checksum(model.prior);
  for (int i = 0; i < 6; ++i) observe(model, buffer, one_hot(6, i % 3), flips_rng);
  for (int step = 0; step < 200; ++step) cfn_train_step(model, buffer, 8, batch_rng);
  CHECK(params_checksum(model.prior) == checksum_before);
}

TEST_CASE("normalized prior has near-unit second moment over the stream") {
  Rng rng(17);
  const int dim = 30;
  CfnModel model = make_cfn_model(small_config(dim, 10, true, true, {16}), rng);
  std::vector<Vector> states;
  for (int k = 0; k < dim; ++k) states.push_back(one_hot(dim, k));
  for (const Vector& s : states) model.prior_stats.update(forward(model.prior, s));

  RunningVectorStats normalized;
  for (const Vector& s : states)
    normalized.update(normalize_prior_output(model, forward(model.prior, s)));
  const Vector second_moment =
      normalized.variance() + normalized.mean.cwiseProduct(normalized.mean);
  for (int j = 0; j < 10; ++j) CHECK(second_moment[j] == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("prioritization on/off reach the same converged bonuses") {
  // Fixed buffer with states of unequal counts; both samplers must settle
  // on the per-state label means.
  const int dim = 3, d = 10;
  const std::vector<int> counts = {1, 3, 6};

  auto converged_bonuses = [&](bool prioritized) {
    Rng init(18), flips(19), batch(20);
    CfnConfig config = small_config(dim, d, false, prioritized);
    config.learning_rate = 5e-3;
    CfnModel model = make_cfn_model(config, init);
    CoinFlipBuffer buffer(16);
    for (int k = 0; k < dim; ++k)
      for (int i = 0; i < counts[static_cast<std::size_t>(k)]; ++i)
        observe(model, buffer, one_hot(dim, k), flips);
    // Adam keeps a stochastic-sampling noise floor proportional to
    // sqrt(lr)/sqrt(batch); anneal both to approach the exact optimum.
    for (auto [steps, lr, bsize] : {std::tuple{8000, 5e-3, 32}, {4000, 1e-3, 64},
                                    {4000, 1e-4, 256}, {4000, 1e-5, 512}}) {
      model.config.learning_rate = lr;
      for (int step = 0; step < steps; ++step) cfn_train_step(model, buffer, bsize, batch);
    }
    Vector bonuses(dim);
    for (int k = 0; k < dim; ++k) bonuses[k] = cfn_bonus(model, one_hot(dim, k));
    return bonuses;
  };

  const Vector with = converged_bonuses(true);
  const Vector without = converged_bonuses(false);
  CHECK((with - without).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("model checkpoint round trip preserves outputs") {
  Rng rng(21), flips_rng(22);
  CfnModel model = make_cfn_model(small_config(5, 6, true, true, {8}), rng);
  CoinFlipBuffer buffer(8);
  for (int i = 0; i < 5; ++i) observe(model, buffer, one_hot(5, i), flips_rng);

  const CfnModel restored = cfn_model_from_json(cfn_model_to_json(model));
  for (int k = 0; k < 5; ++k) {
    const Vector s = one_hot(5, k);
    CHECK(cfn_bonus(restored, s) == cfn_bonus(model, s));
  }
}

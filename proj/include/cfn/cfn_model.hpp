#pragma once

#include <cstdint>

#include "cfn/buffer.hpp"
#include "cfn/mlp.hpp"
#include "cfn/rng.hpp"
#include "cfn/stats.hpp"
#include "cfn/types.hpp"

namespace cfn {

struct CfnConfig {
  int flip_count = 20;  // d
  MlpSpec net;          // net.output_dim must equal flip_count
  double learning_rate = 1e-4;
  double priority_alpha = 0.5;
  bool prior_enabled = true;
  bool prioritization_enabled = true;
  bool zero_flip_mode = false;
  bool subtract_prior_mean = true;
};

/// Trainable network plus frozen normalized random prior. The prior's
/// parameters never change after construction; prior_stats tracks the
/// running per-dimension mean/variance of its raw outputs.
struct CfnModel {
  CfnConfig config;
  MlpParams trainable;
  MlpParams prior;
  AdamState optimizer;
  RunningVectorStats prior_stats;
};

CfnModel make_cfn_model(const CfnConfig& config, Rng& init_rng);

/// Normalizes a raw prior output with the current running statistics.
/// Pure read; requires at least one prior observation.
Vector normalize_prior_output(const CfnModel& model, const Eigen::Ref<const Vector>& raw);

/// trainable(s) + normalized prior(s) when the prior is enabled, else just
/// trainable(s). Pure read.
Vector cfn_output(const CfnModel& model, const Eigen::Ref<const Vector>& state);

/// Inverse-count estimate (1/d) * ||f(s)||^2. Pure read.
double cfn_inverse_count(const CfnModel& model, const Eigen::Ref<const Vector>& state);

/// Exploration bonus sqrt((1/d) * ||f(s)||^2). Pure read.
double cfn_bonus(const CfnModel& model, const Eigen::Ref<const Vector>& state);

/// Folds the state's raw prior output into the normalizer, draws a fresh
/// coin-flip label (the zero vector in zero_flip_mode) and stores the
/// record, using the model's current inverse-count estimate as the initial
/// priority input. Returns the new record's id.
std::uint64_t observe(CfnModel& model, CoinFlipBuffer& buffer,
                      const Eigen::Ref<const Vector>& state, Rng& rng);

/// One training step: sample a batch (prioritized, or uniform when
/// prioritization is disabled), regress the trainable network onto
/// (label - normalized prior), and refresh the sampled records' priorities
/// with post-step estimates. Returns the pre-step loss.
double cfn_train_step(CfnModel& model, CoinFlipBuffer& buffer, int batch_size, Rng& rng);

}  // namespace cfn

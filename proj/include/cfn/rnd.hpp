#pragma once

#include <cstdint>
#include <deque>

#include "cfn/mlp.hpp"
#include "cfn/rng.hpp"
#include "cfn/stats.hpp"
#include "cfn/types.hpp"

namespace cfn {

struct RndConfig {
  MlpSpec net;
  double learning_rate = 1e-4;
  bool normalize_bonus = false;
};

/// Random network distillation: the bonus is the squared error of a
/// trainable predictor mimicking a frozen random target network.
struct RndModel {
  RndConfig config;
  MlpParams target;  // frozen
  MlpParams predictor;
  AdamState optimizer;
  RunningStats bonus_stats;
};

RndModel make_rnd_model(const RndConfig& config, Rng& init_rng);

/// ||predictor(s) - target(s)||^2, optionally standardized by the running
/// bonus statistics. Pure read.
double rnd_bonus(const RndModel& model, const Eigen::Ref<const Vector>& state);

/// Records a raw bonus into the running statistics (used only when
/// normalize_bonus is on).
void rnd_observe(RndModel& model, const Eigen::Ref<const Vector>& state);

/// One Adam step minimizing the mean squared prediction error over the
/// batch (rows = states). Returns the pre-step loss.
double rnd_train_step(RndModel& model, const Eigen::Ref<const Matrix>& states,
                      double learning_rate);

/// Plain FIFO ring of states for uniform replay (the RND training stream).
class StateReplay {
 public:
  explicit StateReplay(std::size_t capacity) : capacity_(capacity) {}

  void push(Vector state);
  Matrix sample_batch(int batch_size, Rng& rng) const;  // with replacement
  std::size_t size() const { return states_.size(); }

 private:
  std::size_t capacity_;
  std::deque<Vector> states_;
};

}  // namespace cfn

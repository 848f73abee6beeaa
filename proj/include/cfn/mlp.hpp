#pragma once

#include <cstdint>
#include <vector>

#include "cfn/rng.hpp"
#include "cfn/types.hpp"

namespace cfn {

enum class Activation { relu, tanh };

/// Feed-forward architecture description. Hidden layers use the configured
/// activation; the output layer is linear.
struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden_layers;
  int output_dim = 1;
  Activation activation = Activation::relu;
};

/// Dense parameters for an MlpSpec. weights[l] maps layer l's input
/// (rows = fan-in) to its output (cols = fan-out).
struct MlpParams {
  MlpSpec spec;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

/// Fan-in-scaled zero-mean init: weight variance 2/fan_in for relu,
/// 1/fan_in for tanh; biases zero.
MlpParams init_params(const MlpSpec& spec, Rng& rng);

Vector forward(const MlpParams& params, const Eigen::Ref<const Vector>& input);

/// Batched evaluation, one example per row.
Matrix forward_batch(const MlpParams& params, const Eigen::Ref<const Matrix>& inputs);

/// Per-layer pre-activations and activations for a batch (rows = examples).
/// trace.pre[l] holds layer l's affine output, trace.post[l] the activated
/// value; the final layer is linear so pre.back() == post.back().
struct ForwardTrace {
  std::vector<Matrix> pre;
  std::vector<Matrix> post;
};
ForwardTrace forward_trace(const MlpParams& params, const Eigen::Ref<const Matrix>& inputs);

struct MlpGradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

/// Gradient of the weighted mean-squared error
///     L = sum_i w_i * ||targets_i - f(inputs_i)||^2 / (batch * output_dim)
/// Returns the loss through loss_out.
MlpGradients weighted_mse_gradient(const MlpParams& params,
                                   const Eigen::Ref<const Matrix>& inputs,
                                   const Eigen::Ref<const Matrix>& targets,
                                   const Eigen::Ref<const Vector>& example_weights,
                                   double* loss_out);

/// Adam moment accumulators; shapes mirror the parameters.
struct AdamState {
  std::vector<Matrix> m_weights, v_weights;
  std::vector<Vector> m_biases, v_biases;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};
AdamState make_adam_state(const MlpParams& params);

void adam_update(MlpParams& params, const MlpGradients& grads, AdamState& state,
                 double learning_rate);

/// One Adam step on the weighted MSE. Returns the pre-step loss; throws
/// TrainingDivergedError if that loss is not finite (parameters untouched).
double mse_grad_step(MlpParams& params, const Eigen::Ref<const Matrix>& inputs,
                     const Eigen::Ref<const Matrix>& targets,
                     const Eigen::Ref<const Vector>& example_weights, AdamState& state,
                     double learning_rate);

/// Maximum relative discrepancy between the analytic gradient of
/// ||target - f(input)||^2 and central finite differences (step 1e-5),
/// over all parameters.
double finite_difference_check(const MlpParams& params, const Eigen::Ref<const Vector>& input,
                               const Eigen::Ref<const Vector>& target);

/// Smallest |pre-activation| over all hidden units for this input; used to
/// keep finite-difference checks away from relu kinks.
double min_preactivation_magnitude(const MlpParams& params,
                                   const Eigen::Ref<const Vector>& input);

/// Order-independent checksum of all parameter values (frozen-network tests).
double params_checksum(const MlpParams& params);

std::int64_t param_count(const MlpParams& params);

}  // namespace cfn

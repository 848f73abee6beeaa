#include "cfn/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cfn {

namespace {

std::vector<int> layer_sizes(const MlpSpec& spec) {
  std::vector<int> sizes;
  sizes.push_back(spec.input_dim);
  for (int h : spec.hidden_layers) sizes.push_back(h);
  sizes.push_back(spec.output_dim);
  return sizes;
}

void validate_spec(const MlpSpec& spec) {
  if (spec.input_dim < 1) throw std::invalid_argument("MlpSpec: input_dim must be >= 1");
  if (spec.output_dim < 1) throw std::invalid_argument("MlpSpec: output_dim must be >= 1");
  for (int h : spec.hidden_layers)
    if (h < 1) throw std::invalid_argument("MlpSpec: hidden layer sizes must be >= 1");
}

inline void apply_activation(Matrix& x, Activation act) {
  if (act == Activation::relu)
    x = x.cwiseMax(0.0);
  else
    x = x.array().tanh().matrix();
}

// Derivative of the activation given pre- and post-activation values.
// relu uses derivative 0 at exactly 0.
inline Matrix activation_derivative(const Matrix& pre, const Matrix& post, Activation act) {
  if (act == Activation::relu)
    return (pre.array() > 0.0).cast<double>().matrix();
  return (1.0 - post.array().square()).matrix();
}

}  // namespace

MlpParams init_params(const MlpSpec& spec, Rng& rng) {
  validate_spec(spec);
  MlpParams params;
  params.spec = spec;
  const std::vector<int> sizes = layer_sizes(spec);
  const double gain = (spec.activation == Activation::relu) ? 2.0 : 1.0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l];
    const int fan_out = sizes[l + 1];
    const double stddev = std::sqrt(gain / static_cast<double>(fan_in));
    Matrix w(fan_in, fan_out);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = stddev * rng.normal();
    params.weights.push_back(std::move(w));
    params.biases.push_back(Vector::Zero(fan_out));
  }
  return params;
}

ForwardTrace forward_trace(const MlpParams& params, const Eigen::Ref<const Matrix>& inputs) {
  if (inputs.cols() != params.spec.input_dim)
    throw std::invalid_argument("forward: input dimension mismatch");
  ForwardTrace trace;
  const std::size_t n_layers = params.weights.size();
  trace.pre.reserve(n_layers);
  trace.post.reserve(n_layers);
  Matrix x = inputs;
  for (std::size_t l = 0; l < n_layers; ++l) {
    Matrix pre = (x * params.weights[l]).rowwise() + params.biases[l].transpose();
    Matrix post = pre;
    if (l + 1 < n_layers) apply_activation(post, params.spec.activation);
    x = post;
    trace.pre.push_back(std::move(pre));
    trace.post.push_back(std::move(post));
  }
  return trace;
}

Matrix forward_batch(const MlpParams& params, const Eigen::Ref<const Matrix>& inputs) {
  if (inputs.cols() != params.spec.input_dim)
    throw std::invalid_argument("forward: input dimension mismatch");
  const std::size_t n_layers = params.weights.size();
  Matrix x = inputs;
  for (std::size_t l = 0; l < n_layers; ++l) {
    x = ((x * params.weights[l]).rowwise() + params.biases[l].transpose()).eval();
    if (l + 1 < n_layers) apply_activation(x, params.spec.activation);
  }
  return x;
}

Vector forward(const MlpParams& params, const Eigen::Ref<const Vector>& input) {
  if (input.size() != params.spec.input_dim)
    throw std::invalid_argument("forward: input dimension mismatch");
  return forward_batch(params, input.transpose()).row(0).transpose();
}

MlpGradients weighted_mse_gradient(const MlpParams& params,
                                   const Eigen::Ref<const Matrix>& inputs,
                                   const Eigen::Ref<const Matrix>& targets,
                                   const Eigen::Ref<const Vector>& example_weights,
                                   double* loss_out) {
  if (inputs.rows() == 0) throw std::invalid_argument("weighted_mse_gradient: empty batch");
  if (targets.rows() != inputs.rows() || targets.cols() != params.spec.output_dim)
    throw std::invalid_argument("weighted_mse_gradient: target shape mismatch");
  if (example_weights.size() != inputs.rows())
    throw std::invalid_argument("weighted_mse_gradient: weight count mismatch");

  const ForwardTrace trace = forward_trace(params, inputs);
  const std::size_t n_layers = params.weights.size();
  const double norm = static_cast<double>(inputs.rows()) * static_cast<double>(params.spec.output_dim);

  const Matrix error = trace.post.back() - targets;  // batch x d
  if (loss_out) {
    double loss = 0.0;
    for (Eigen::Index i = 0; i < error.rows(); ++i)
      loss += example_weights[i] * error.row(i).squaredNorm();
    *loss_out = loss / norm;
  }

  MlpGradients grads;
  grads.weights.resize(n_layers);
  grads.biases.resize(n_layers);

  // dL/d(output) with the 2/(batch*d) factor and per-example weights folded in.
  Matrix delta = (2.0 / norm) * (example_weights.asDiagonal() * error);
  for (std::size_t l = n_layers; l-- > 0;) {
    if (l == 0)
      grads.weights[l] = inputs.transpose() * delta;
    else
      grads.weights[l] = trace.post[l - 1].transpose() * delta;
    grads.biases[l] = delta.colwise().sum();
    if (l > 0) {
      delta = (delta * params.weights[l].transpose())
                  .cwiseProduct(activation_derivative(trace.pre[l - 1], trace.post[l - 1],
                                                      params.spec.activation));
    }
  }
  return grads;
}

AdamState make_adam_state(const MlpParams& params) {
  AdamState state;
  for (const Matrix& w : params.weights) {
    state.m_weights.push_back(Matrix::Zero(w.rows(), w.cols()));
    state.v_weights.push_back(Matrix::Zero(w.rows(), w.cols()));
  }
  for (const Vector& b : params.biases) {
    state.m_biases.push_back(Vector::Zero(b.size()));
    state.v_biases.push_back(Vector::Zero(b.size()));
  }
  return state;
}

namespace {

template <typename T>
void adam_apply(T& param, const T& grad, T& m, T& v, const AdamState& s, double lr,
                double bias1, double bias2) {
  m = s.beta1 * m + (1.0 - s.beta1) * grad;
  v = s.beta2 * v + (1.0 - s.beta2) * grad.cwiseProduct(grad);
  param.array() -= lr * (m.array() / bias1) / ((v.array() / bias2).sqrt() + s.epsilon);
}

}  // namespace

void adam_update(MlpParams& params, const MlpGradients& grads, AdamState& state,
                 double learning_rate) {
  ++state.step;
  const double bias1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    adam_apply(params.weights[l], grads.weights[l], state.m_weights[l], state.v_weights[l],
               state, learning_rate, bias1, bias2);
    adam_apply(params.biases[l], grads.biases[l], state.m_biases[l], state.v_biases[l], state,
               learning_rate, bias1, bias2);
  }
}

double mse_grad_step(MlpParams& params, const Eigen::Ref<const Matrix>& inputs,
                     const Eigen::Ref<const Matrix>& targets,
                     const Eigen::Ref<const Vector>& example_weights, AdamState& state,
                     double learning_rate) {
  double loss = 0.0;
  MlpGradients grads =
      weighted_mse_gradient(params, inputs, targets, example_weights, &loss);
  if (!std::isfinite(loss)) throw TrainingDivergedError("mse_grad_step: non-finite loss");
  adam_update(params, grads, state, learning_rate);
  return loss;
}

double finite_difference_check(const MlpParams& params, const Eigen::Ref<const Vector>& input,
                               const Eigen::Ref<const Vector>& target) {
  const Matrix inputs = input.transpose();
  const Matrix targets = target.transpose();
  const Vector one = Vector::Ones(1);
  // Scale by batch*d to turn the normalized loss into plain ||t - f(x)||^2.
  const double scale = static_cast<double>(target.size());

  MlpGradients analytic = weighted_mse_gradient(params, inputs, targets, one, nullptr);

  const double h = 1e-5;
  MlpParams probe = params;
  double worst = 0.0;
  auto loss_at = [&]() {
    return (forward(probe, input) - target).squaredNorm();
  };
  auto check_entry = [&](double& value, double analytic_grad) {
    const double saved = value;
    value = saved + h;
    const double up = loss_at();
    value = saved - h;
    const double down = loss_at();
    value = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic_grad * scale;
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-4});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  };

  for (std::size_t l = 0; l < probe.weights.size(); ++l) {
    for (Eigen::Index i = 0; i < probe.weights[l].rows(); ++i)
      for (Eigen::Index j = 0; j < probe.weights[l].cols(); ++j)
        check_entry(probe.weights[l](i, j), analytic.weights[l](i, j));
    for (Eigen::Index i = 0; i < probe.biases[l].size(); ++i)
      check_entry(probe.biases[l][i], analytic.biases[l][i]);
  }
  return worst;
}

double min_preactivation_magnitude(const MlpParams& params,
                                   const Eigen::Ref<const Vector>& input) {
  const ForwardTrace trace = forward_trace(params, input.transpose());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l + 1 < trace.pre.size(); ++l)
    best = std::min(best, trace.pre[l].cwiseAbs().minCoeff());
  return best;
}

double params_checksum(const MlpParams& params) {
  double sum = 0.0;
  std::uint64_t k = 1;
  for (const Matrix& w : params.weights)
    for (Eigen::Index i = 0; i < w.size(); ++i) sum += w.data()[i] * std::sin(static_cast<double>(k++));
  for (const Vector& b : params.biases)
    for (Eigen::Index i = 0; i < b.size(); ++i) sum += b.data()[i] * std::sin(static_cast<double>(k++));
  return sum;
}

std::int64_t param_count(const MlpParams& params) {
  std::int64_t n = 0;
  for (const Matrix& w : params.weights) n += w.size();
  for (const Vector& b : params.biases) n += b.size();
  return n;
}

}  // namespace cfn

#include "cfn/linear.hpp"

#include <Eigen/SVD>

#include <stdexcept>

namespace cfn {

LinearCfnSolution fit_linear(const Eigen::Ref<const Matrix>& states,
                             const Eigen::Ref<const Matrix>& labels) {
  if (states.rows() < 1 || states.cols() < 1)
    throw std::invalid_argument("fit_linear: states must be nonempty");
  if (labels.rows() != states.rows())
    throw std::invalid_argument("fit_linear: label row count must match state row count");

  Eigen::JacobiSVD<Matrix> svd(states, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const Vector& sigma = svd.singularValues();
  const double cutoff = kSingularValueCutoff * (sigma.size() > 0 ? sigma[0] : 0.0);

  Vector sigma_pinv = Vector::Zero(sigma.size());
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (sigma[i] > cutoff) sigma_pinv[i] = 1.0 / sigma[i];

  LinearCfnSolution out;
  out.singular_values = sigma;
  out.singular_basis = svd.matrixV();
  out.weights = svd.matrixV().leftCols(sigma.size()) * sigma_pinv.asDiagonal() *
                (svd.matrixU().transpose() * labels);
  return out;
}

double expected_inverse_count(const Eigen::Ref<const Vector>& query_state,
                              const Eigen::Ref<const Matrix>& states) {
  if (states.rows() < 1 || states.cols() < 1)
    throw std::invalid_argument("expected_inverse_count: states must be nonempty");
  if (query_state.size() != states.cols())
    throw std::invalid_argument("expected_inverse_count: query dimension mismatch");

  Eigen::JacobiSVD<Matrix> svd(states, Eigen::ComputeFullV);
  const Vector& sigma = svd.singularValues();
  const double cutoff = kSingularValueCutoff * (sigma.size() > 0 ? sigma[0] : 0.0);

  const Vector coords = svd.matrixV().transpose() * query_state;
  double total = 0.0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma[i] > cutoff) {
      const double ratio = coords[i] / sigma[i];
      total += ratio * ratio;
    }
  }
  return total;
}

}  // namespace cfn

#include <doctest.h>

#include <cmath>

#include "cfn/linear.hpp"
#include "cfn/rng.hpp"
#include "cfn/stats.hpp"

using namespace cfn;

namespace {

Matrix random_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

Matrix random_labels(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.rademacher();
  return m;
}

}  // namespace

TEST_CASE("fit_linear interpolates a 1x1 identity system") {
  Matrix states(1, 1), labels(1, 1);
  states << 1.0;
  labels << 1.0;
  const LinearCfnSolution fit = fit_linear(states, labels);
  CHECK(fit.weights(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fit_linear on repeated one-hot rows averages the labels") {
  const int p = 3, n = 4, d = 2;
  Matrix states = Matrix::Zero(n, p);
  for (int i = 0; i < n; ++i) states(i, 1) = 1.0;  // all rows are e_1
  Rng rng(2);
  Matrix labels = random_labels(n, d, rng);
  const LinearCfnSolution fit = fit_linear(states, labels);
  const Vector mean_label = labels.colwise().mean().transpose();
  CHECK((fit.weights.row(1).transpose() - mean_label).cwiseAbs().maxCoeff() < 1e-10);
  // untouched feature rows get zero weight (minimum-norm solution)
  CHECK(fit.weights.row(0).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(fit.weights.row(2).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("fit_linear matches the normal-equations oracle on full-rank data") {
  Rng rng(3);
  const Matrix states = random_matrix(8, 3, rng);
  const Matrix labels = random_labels(8, 4, rng);
  const LinearCfnSolution fit = fit_linear(states, labels);
  // independent route: dense normal equations
  const Matrix oracle = (states.transpose() * states).inverse() * states.transpose() * labels;
  CHECK((fit.weights - oracle).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("fit_linear residual is orthogonal to the column space") {
  Rng rng(4);
  const Matrix states = random_matrix(10, 4, rng);
  const Matrix labels = random_labels(10, 3, rng);
  const LinearCfnSolution fit = fit_linear(states, labels);
  const Matrix residual = states * fit.weights - labels;
  CHECK((states.transpose() * residual).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("singular basis is orthonormal") {
  Rng rng(5);
  const Matrix states = random_matrix(7, 5, rng);
  const LinearCfnSolution fit = fit_linear(states, random_labels(7, 2, rng));
  const Matrix gram = fit.singular_basis.transpose() * fit.singular_basis;
  CHECK((gram - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("fit_linear rejects mismatched shapes") {
  CHECK_THROWS_AS(fit_linear(Matrix::Ones(2, 2), Matrix::Ones(3, 1)), std::invalid_argument);
  CHECK_THROWS_AS(expected_inverse_count(Vector::Ones(3), Matrix::Ones(2, 2)),
                  std::invalid_argument);
}

TEST_CASE("tabular recovery: one-hot counts invert exactly") {
  const std::vector<int> counts = {4, 1, 7, 2};
  const int p = static_cast<int>(counts.size());
  int n = 0;
  for (int c : counts) n += c;
  Matrix states = Matrix::Zero(n, p);
  int row = 0;
  for (int k = 0; k < p; ++k)
    for (int i = 0; i < counts[k]; ++i) states(row++, k) = 1.0;

  for (int k = 0; k < p; ++k) {
    Vector query = Vector::Zero(p);
    query[k] = 1.0;
    CHECK(expected_inverse_count(query, states) ==
          doctest::Approx(1.0 / counts[k]).epsilon(1e-12));
  }
}

TEST_CASE("expected_inverse_count single-count identity") {
  Matrix states = Matrix::Identity(3, 3);
  Vector query = Vector::Zero(3);
  query[2] = 1.0;
  CHECK(expected_inverse_count(query, states) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("novel directions contribute zero") {
  // Data spans only e_0; a query along e_1 has no representation.
  Matrix states = Matrix::Zero(3, 2);
  states.col(0).setOnes();
  Vector query(2);
  query << 0.0, 1.0;
  CHECK(expected_inverse_count(query, states) == 0.0);
  // Mixed query counts only its in-span component.
  query << 1.0, 1.0;
  CHECK(expected_inverse_count(query, states) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("basis invariance under orthogonal feature maps") {
  Rng rng(6);
  const int n = 9, p = 4;
  const Matrix states = random_matrix(n, p, rng);
  const Matrix q = Eigen::HouseholderQR<Matrix>(random_matrix(p, p, rng)).householderQ();
  for (int trial = 0; trial < 5; ++trial) {
    Vector query(p);
    for (int j = 0; j < p; ++j) query[j] = rng.normal();
    const double base = expected_inverse_count(query, states);
    const double rotated =
        expected_inverse_count((query.transpose() * q).transpose(), states * q);
    CHECK(rotated == doctest::Approx(base).epsilon(1e-8));
  }
}

TEST_CASE("Monte-Carlo consistency of the closed form") {
  Rng rng(7);
  const int n = 6, p = 2, d = 20;
  const Matrix states = random_matrix(n, p, rng);
  const Vector query = states.row(1).transpose();
  const double closed_form = expected_inverse_count(query, states);
  RunningStats mc;
  for (int t = 0; t < 10000; ++t) {
    const Matrix labels = random_labels(n, d, rng);
    const LinearCfnSolution fit = fit_linear(states, labels);
    mc.update((query.transpose() * fit.weights).squaredNorm() / d);
  }
  const double se = standard_error(mc.variance(), mc.count);
  CHECK(std::abs(mc.mean - closed_form) <= 3.0 * se);
}

TEST_CASE("rank-deficient data uses the pseudo-inverse") {
  // Two identical columns: rank 1 out of p = 2.
  Matrix states(4, 2);
  states << 1, 1, 1, 1, 1, 1, 1, 1;
  Rng rng(8);
  const Matrix labels = random_labels(4, 3, rng);
  const LinearCfnSolution fit = fit_linear(states, labels);
  const Matrix residual = states * fit.weights - labels;
  // Least-squares optimality still holds.
  CHECK((states.transpose() * residual).cwiseAbs().maxCoeff() < 1e-8);
  // The aligned direction has total weight 4 occurrences: (1,1)/sqrt(2)
  // carries singular value sqrt(8), so the inverse count is 1/4 per unit
  // of squared query norm along it.
  Vector query(2);
  query << 1.0, 1.0;
  CHECK(expected_inverse_count(query, states) == doctest::Approx(0.25).epsilon(1e-10));
}

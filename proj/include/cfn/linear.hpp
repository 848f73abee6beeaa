#pragma once

#include "cfn/types.hpp"

namespace cfn {

/// Relative singular-value cutoff: directions with singular value below
/// cutoff * sigma_max are treated as absent from the data.
inline constexpr double kSingularValueCutoff = 1e-10;

/// Minimum-norm least-squares fit of coin-flip labels against state rows,
/// together with the SVD pieces the closed-form count formula needs.
struct LinearCfnSolution {
  Matrix weights;         // p x d, one column per flip dimension
  Matrix singular_basis;  // p x p right-singular vectors V (columns)
  Vector singular_values; // min(n, p) values, descending
};

/// Solves min_W ||states * W - labels||_F^2, returning the minimum-norm
/// solution via the singular-value pseudo-inverse when states is
/// rank-deficient.
LinearCfnSolution fit_linear(const Eigen::Ref<const Matrix>& states,
                             const Eigen::Ref<const Matrix>& labels);

/// Expectation over label draws of the inverse-count estimate a linear fit
/// assigns to query_state: sum over retained singular directions of
/// (coordinate_i / sigma_i)^2. Query components outside the data's row
/// space contribute zero.
double expected_inverse_count(const Eigen::Ref<const Vector>& query_state,
                              const Eigen::Ref<const Matrix>& states);

}  // namespace cfn

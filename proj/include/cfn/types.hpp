#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace cfn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Thrown when a buffer operation needs at least one stored record.
struct EmptyBufferError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when a record id does not name a live buffer record.
struct NotFoundError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when an operation is called on an object in the wrong state
/// (e.g. stepping a finished episode, querying an unprimed normalizer).
struct InvalidStateError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Thrown when a training loss stops being finite.
struct TrainingDivergedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cfn

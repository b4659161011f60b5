#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace eosq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using CodeMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

// Regularity parameter of the synthetic model checks (aspect ratio,
// covariance spectrum). Admits every block shape used in the test suites.
inline constexpr double kDefaultTau = 0.05;

// Input violates an operation's contract (bad shapes, out-of-range config).
class validation_error : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed file or byte stream.
class format_error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numeric procedure cannot proceed: non-finite input, evaluation inside the
// spectral bulk, non-convergence.
class numeric_error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace eosq

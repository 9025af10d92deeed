#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tgf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Vec2 = Eigen::Vector2d;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Scene timing contract: 50 steps at 10 Hz, 20 observed + 30 future.
inline constexpr int kObsSteps = 20;
inline constexpr int kFutSteps = 30;
inline constexpr int kTotalSteps = 50;
inline constexpr double kDt = 0.1;

inline constexpr double kLaneFilterRadius = 50.0;
inline constexpr double kEdgeRadius = 2.0;
inline constexpr double kMissThreshold = 2.0;

// Validation failures map to CLI exit code 1, numerical failures to 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when the agent of interest has no definable heading.
class DegenerateHeadingError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tgf

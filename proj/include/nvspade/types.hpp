#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace nvspade {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using Point = Eigen::Vector2d;
/// One row per emitter or photon: (x, y).
using Positions = Eigen::Matrix<double, Eigen::Dynamic, 2>;
using Counts = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied a value outside an operation's domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Emitter positions too close to yield linearly independent states.
class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

/// Rank deficiency, non-finite intermediate values or solver breakdown.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace nvspade

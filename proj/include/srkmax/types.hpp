#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace srkmax {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input: malformed tableau, inconsistent dimensions, bad config values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class LayoutMismatch : public Error {
 public:
  using Error::Error;
};

/// Stage fixed-point iteration exceeded its iteration budget or started expanding.
class FixedPointDivergence : public Error {
 public:
  using Error::Error;
};

/// A linear stage solve finished with a residual above tolerance.
class StageSolveFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace srkmax

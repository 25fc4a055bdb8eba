#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace rbtr {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Base class of all errors thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input: bad configuration values, inconsistent shapes, unknown ids.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A linear solve, factorization or estimator evaluation failed.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// An optimization loop made no progress within its safety caps.
class StagnationError : public Error {
 public:
  using Error::Error;
};

}  // namespace rbtr
